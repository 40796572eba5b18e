"""Command-line driver: build a model, run verification suites, write a JSON report.

    mobius-va run --config run.json
    mobius-va run --model virasoro --c -22/5 --max-weight 4 --suite gram --out report.json

Exit status: 0 when nothing failed, 1 when some check failed, 2 for a bad config.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

SCHEMA_VERSION = 1
SUITES = ("axioms", "gram", "roundtrip", "correlators", "reeh_schlieder")
DEFAULT_TOLERANCES = {
    "covariance": 1e-6,
    "rotation": 1e-10,
    "group_law": 1e-8,
    "vacuum": 1e-10,
    "form_group": 1e-8,
    "smeared_form": 1e-10,
    "rank": 1e-8,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = "heisenberg"
    c: str | None = None
    simple: bool = False
    max_weight: int = 8
    band: int = 8
    margin: int | None = None
    tolerances: dict = field(default_factory=dict)
    suite: str = "all"
    out: str | None = None
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if isinstance(data.get("model"), dict):
            model_cfg = data.pop("model")
            data["model"] = model_cfg.get("name")
            for key in ("c", "simple"):
                if key in model_cfg:
                    data[key] = model_cfg[key]
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def central_charge(self) -> Fraction:
        try:
            return Fraction(str(self.c))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"central charge {self.c!r} is not a rational number") from exc

    def effective_margin(self) -> int:
        if self.margin is not None:
            return self.margin
        return 3 if self.model == "heisenberg" else 4

    def validate(self) -> None:
        if self.model not in ("heisenberg", "virasoro"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model == "virasoro":
            if self.c is None:
                raise ConfigError("virasoro needs a central charge c")
            self.central_charge()
        elif self.simple:
            raise ConfigError("the simple flag applies to virasoro only")
        for name in ("max_weight", "band", "seed"):
            if not isinstance(getattr(self, name), int) or isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be an integer")
        if self.margin is not None and (not isinstance(self.margin, int) or isinstance(self.margin, bool)):
            raise ConfigError("margin must be an integer")
        margin = self.effective_margin()
        if margin < 1:
            raise ConfigError("margin must be at least 1")
        if self.max_weight < margin:
            raise ConfigError(f"max weight {self.max_weight} is below the margin {margin}")
        if self.band < 1:
            raise ConfigError("band must be at least 1")
        if self.suite not in SUITES + ("all",):
            raise ConfigError(f"unknown suite {self.suite!r}")
        for key, val in self.tolerances.items():
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {key!r}")
            if not isinstance(val, (int, float)) or not val > 0 or not math.isfinite(val):
                raise ConfigError(f"tolerance {key!r} must be positive")

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def suites(self) -> tuple[str, ...]:
        return SUITES if self.suite == "all" else (self.suite,)


@dataclass
class Entry:
    name: str
    anchor: str
    status: str  # pass | fail | inconclusive
    deviation: float | None
    runtime: float
    details: dict = field(default_factory=dict)


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _json_safe(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# ---------------------------------------------------------------------------
# suites; each yields (name, anchor, thunk) where thunk returns (status, deviation, details)

Check = tuple[str, str, Callable[[], tuple[str, float | None, dict]]]


def build_model(cfg: RunConfig):
    from .vertex import build_heisenberg, build_virasoro

    if cfg.model == "heisenberg":
        return build_heisenberg(cfg.max_weight, cfg.effective_margin())
    return build_virasoro(cfg.central_charge(), cfg.max_weight, cfg.simple, cfg.effective_margin())


def _theta(model):
    from .forms import Involution

    signs = {g.name: (-1 if g.dim % 2 else 1) for g in model.generators}
    return Involution.from_signs(model, signs)


def axioms_suite(model, cfg: RunConfig) -> Iterator[Check]:
    from .circle import LieElement, MoebiusElement, TestFunction, exp_lie
    from .errors import TruncationError
    from .vertex import borcherds_consistency, identity_field, locality_order_check, mobius_axiom_check
    from .wightman import (
        covariance_check,
        group_law_check,
        infinitesimal_covariance_check,
        spectrum_check,
        vacuum_cyclicity_check,
        vacuum_invariance_check,
    )

    gens = model.generators
    rng = np.random.default_rng(cfg.seed)
    for u in gens:
        for v in gens:
            def bc(u=u, v=v):
                rep = borcherds_consistency(model, u, v)
                return _status(rep.passed), 0.0 if rep.passed else 1.0, {
                    "blocks_compared": rep.blocks_compared, "skipped": rep.skipped_blocks}
            yield f"borcherds_commutator[{u.name},{v.name}]", "commutator formula for modes", bc

            def loc(u=u, v=v):
                res = locality_order_check(model, u, v)
                if res.inconclusive:
                    return "inconclusive", None, {"order": res.order}
                return _status(res.holds_at_trial), None, {"order": res.order, "trial": res.trial}
            yield f"locality[{u.name},{v.name}]", "locality: (z-w)^k [Y(u,z), Y(v,w)] = 0", loc
    for f in gens + [identity_field(model)]:
        def mob(f=f):
            rep = mobius_axiom_check(model, f)
            return _status(rep.passed), rep.max_deviation, {"checks": rep.checks, "skipped": rep.skipped}
        yield f"mobius_axiom[{f.name}]", "sl2 covariance of modes", mob
    for f in gens:
        for m in (-1, 0, 1):
            for n in (-2, 0, 1):
                def inf(f=f, m=m, n=n):
                    res = infinitesimal_covariance_check(model, f, LieElement.basis(m), TestFunction.e(n))
                    return _status(res.passed), res.max_deviation, {}
                yield f"infinitesimal_covariance[{f.name},L{m},e{n}]", "infinitesimal Moebius covariance", inf
    yield "spectrum", "positive energy spectrum", lambda: _wrap(spectrum_check(model))
    yield "vacuum_cyclicity", "vacuum cyclicity", lambda: _wrap(vacuum_cyclicity_check(model))

    rot_tol, cov_tol = cfg.tol("rotation"), cfg.tol("covariance")
    for f in gens:
        for n in range(-min(cfg.band, model.N), min(cfg.band, model.N) + 1):
            phi = float(rng.uniform(-3, 3))

            def rot(f=f, n=n, phi=phi):
                res = covariance_check(model, f, MoebiusElement.rotation(phi), TestFunction.e(n), tol=rot_tol)
                return _status(res.passed), res.max_deviation, {"phi": phi}
            yield f"rotation_covariance[{f.name},e{n}]", "Moebius covariance of smeared fields", rot
    for f in gens:
        for k, X in enumerate(LieElement.real_basis()):
            t = float(rng.uniform(0.05, 0.3))
            coeffs = {n: complex(*rng.normal(size=2)) for n in range(-2, 3)}
            func = TestFunction(coeffs, 2)

            def cov(f=f, X=X, t=t, func=func):
                try:
                    res = covariance_check(model, f, exp_lie(X, t), func, tol=cov_tol)
                except TruncationError as exc:
                    return "inconclusive", exc.mass, {}
                return _status(res.passed), res.max_deviation, {"t": t, "pad": res.details.get("pad")}
            yield f"covariance[{f.name},X{k}]", "Moebius covariance of smeared fields", cov
    g1 = MoebiusElement.random(rng, 0.3)
    g2 = MoebiusElement.random(rng, 0.3)
    yield "group_law", "U is a representation", lambda: _wrap(group_law_check(model, g1, g2, cfg.tol("group_law")))
    yield "vacuum_invariance", "vacuum invariance", lambda: _wrap(vacuum_invariance_check(model, g1, cfg.tol("vacuum")))


def _wrap(res):
    return _status(res.passed), res.max_deviation, _json_safe(res.details)


def gram_suite(model, cfg: RunConfig) -> Iterator[Check]:
    from .forms import build_invariant_form, invariance_check, involutive_structure_check, radical
    from .circle import MoebiusElement, TestFunction

    state: dict = {}

    def tower():
        if "G" not in state:
            state["G"] = build_invariant_form(model)
        return state["G"]

    def symmetric():
        G = tower()
        return _status(G.is_symmetric()), 0.0, {}
    yield "gram_symmetric", "invariant bilinear forms are symmetric", symmetric

    def levels():
        G = tower()
        entries = {}
        for n, M in enumerate(G.matrices):
            entries[str(n)] = [[str(x) for x in row] for row in M]
        return "pass", None, {"levels": entries}
    yield "gram_levels", "invariant bilinear form", levels

    def rad():
        dims = [R.shape[0] for R in radical(tower())]
        return "pass", None, {"kernel_dims": dims}
    yield "radical", "radical of the invariant form", rad

    rng = np.random.default_rng(cfg.seed)
    fs = [TestFunction.e(1), TestFunction({n: complex(*rng.normal(size=2)) for n in range(-2, 3)}, 2)]
    gammas = [MoebiusElement.rotation(float(rng.uniform(-3, 3))), MoebiusElement.random(rng, 0.2)]

    def inv():
        rep = invariance_check(model, tower(), smeared=fs, gammas=gammas, group_tol=cfg.tol("form_group"))
        return _status(rep.passed), rep.max_deviation, {"checks": rep.checks, "violations": len(rep.violations)}
    yield "invariance", "invariance under modes, smeared fields and U", inv

    def unit():
        theta = _theta(model)
        S = build_invariant_form(model, "sesquilinear", theta=theta)
        rep = involutive_structure_check(model, theta, S)
        details = {
            "unitary": rep.unitary,
            "unitary_after_quotient": rep.unitary_after_quotient,
            "null_dims": rep.null_dims,
            "first_failing_minor": rep.first_failing_minor,
        }
        # the verdict is data; the check passes when the structure itself is consistent
        return _status(rep.structure_ok), None, details
    yield "involutive_structure", "involution and positivity", unit


def roundtrip_suite(model, cfg: RunConfig) -> Iterator[Check]:
    from .wightman import roundtrip_check

    def rt():
        rep = roundtrip_check(model)
        return _status(rep.passed), rep.max_deviation, {"dims": rep.reconstructed_dims}
    yield "roundtrip", "vertex algebra to Wightman fields and back", rt


def correlators_suite(model, cfg: RunConfig) -> Iterator[Check]:
    from .circle import TestFunction
    from .errors import TruncationError
    from .forms import build_invariant_form, extend_form_to_smeared
    from .wightman import correlator, correlators_to_csv

    rng = np.random.default_rng(cfg.seed)
    gens = model.generators
    words = []
    for f in gens:
        for n in range(1, min(cfg.band, model.N - model.margin) + 1):
            words.append([(f, TestFunction.e(n)), (f, TestFunction.e(-n))])
        coeffs = {n: complex(*rng.normal(size=2)) for n in range(-2, 3)}
        words.append([(f, TestFunction(coeffs, 2)), (f, TestFunction(coeffs, 2))])

    def corr():
        rows = []
        for word in words:
            try:
                rows.append((word, complex(correlator(model, word))))
            except TruncationError:
                return "inconclusive", None, {}
        return "pass", None, {"csv": correlators_to_csv(rows)}
    yield "vacuum_correlators", "vacuum correlators of smeared fields", corr

    def ext():
        G = build_invariant_form(model)
        dev = 0.0
        for f in gens:
            for n in range(1, 3):
                w1 = [(f, TestFunction.e(-n))]
                w2 = [(f, TestFunction({-n: 1.0 + 0.5j, -n + 1: 0.25}, n))]
                try:
                    direct = complex(extend_form_to_smeared(model, G, w1, w2, "direct"))
                    left = complex(extend_form_to_smeared(model, G, w1, w2, "left"))
                    right = complex(extend_form_to_smeared(model, G, w1, w2, "right"))
                except TruncationError:
                    return "inconclusive", None, {}
                dev = max(dev, abs(direct - left), abs(left - right))
        return _status(dev < cfg.tol("smeared_form")), dev, {}
    yield "smeared_form_extension", "invariant form on smeared words", ext


def reeh_schlieder_suite(model, cfg: RunConfig) -> Iterator[Check]:
    from .wightman import reeh_schlieder_rank

    def rs():
        if model.algebra is None or model.params.get("simple"):
            return "inconclusive", None, {"reason": "needs a universal model"}
        nw = min(4, model.N - model.margin)
        rep = reeh_schlieder_rank(model, (0.0, math.pi / 2), cfg.band, 3, nw, cfg.tol("rank"))
        return _status(rep.passed), rep.sigma_ratio, {"rank": rep.rank, "full_dim": rep.full_dim, "words": rep.words}
    yield "reeh_schlieder_rank", "vacuum cyclic for fields smeared in an interval", rs


SUITE_FUNCS = {
    "axioms": axioms_suite,
    "gram": gram_suite,
    "roundtrip": roundtrip_suite,
    "correlators": correlators_suite,
    "reeh_schlieder": reeh_schlieder_suite,
}


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Run the configured suites; returns ``(exit status, report)``."""
    model = build_model(cfg)
    entries: list[Entry] = []
    for suite in cfg.suites():
        for name, anchor, thunk in SUITE_FUNCS[suite](model, cfg):
            start = time.perf_counter()
            try:
                status, dev, details = thunk()
            except Exception as exc:  # a crashing check is a failure, not a crash of the run
                status, dev, details = "fail", None, {"error": f"{type(exc).__name__}: {exc}"}
            entries.append(Entry(f"{suite}.{name}", anchor, status, dev, time.perf_counter() - start, _json_safe(details)))
    counts = {s: sum(e.status == s for e in entries) for s in ("pass", "fail", "inconclusive")}
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": _json_safe(asdict(cfg)),
        "model": model.to_json(),
        "summary": counts,
        "inconclusive": [e.name for e in entries if e.status == "inconclusive"],
        "checks": [asdict(e) for e in entries],
    }
    return (1 if counts["fail"] else 0), report


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mobius-va", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run verification suites")
    r.add_argument("--config", type=Path, help="JSON config file")
    r.add_argument("--suite", choices=SUITES + ("all",))
    r.add_argument("--model", choices=("heisenberg", "virasoro"))
    r.add_argument("--c", help="central charge as a rational string, e.g. -22/5")
    r.add_argument("--simple", action="store_true", default=None, help="use the simple quotient")
    r.add_argument("--max-weight", type=int)
    r.add_argument("--band", type=int)
    r.add_argument("--margin", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", type=Path, help="report path (default: stdout)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        data: dict = {}
        if args.config is not None:
            try:
                data = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
        overrides = {
            "suite": args.suite,
            "c": args.c,
            "simple": args.simple,
            "max_weight": args.max_weight,
            "band": args.band,
            "margin": args.margin,
            "seed": args.seed,
            "out": str(args.out) if args.out else None,
        }
        if args.model is not None:
            if isinstance(data.get("model"), dict):
                data["model"] = dict(data["model"], name=args.model)
            else:
                data["model"] = args.model
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = RunConfig.from_dict(data)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status, report = run(cfg)
    text = json.dumps(report, indent=2, sort_keys=False)
    if cfg.out:
        Path(cfg.out).write_text(text + "\n")
    else:
        print(text)
    s = report["summary"]
    print(f"{s['pass']} passed, {s['fail']} failed, {s['inconclusive']} inconclusive", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line; the lines are collected in the terminal
summary under "acceptance criteria". Run directly with ``python3 tests/test_acceptance.py``
for the same lines without pytest's report.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
import sympy

from conftest import record
from mobius_va.circle import LieElement, MoebiusElement, TestFunction, exp_lie
from mobius_va.forms import (
    Involution,
    build_invariant_form,
    extend_form_to_smeared,
    involutive_structure_check,
    radical,
)
from mobius_va.vertex import (
    borcherds_consistency,
    build_heisenberg,
    build_virasoro,
    identity_field,
    locality_order_check,
    mobius_axiom_check,
)
from mobius_va.wightman import (
    covariance_check,
    infinitesimal_covariance_check,
    reeh_schlieder_rank,
    roundtrip_check,
    spectrum_check,
    vacuum_cyclicity_check,
)

C_HALF = Fraction(1, 2)
C_YL = Fraction(-22, 5)


# -- independent oracles ------------------------------------------------------


def verma_gram(c: Fraction, level: int) -> sympy.Matrix:
    """Brute-force Shapovalov matrix of the Virasoro vacuum module at ``level``.

    States are PBW words ``L_{-k1} ... L_{-kr} Omega`` with ``k1 >= ... >= kr >= 2``;
    the pairing moves positive modes right with ``[L_m, L_n]`` until they hit the vacuum.
    """

    @lru_cache(maxsize=None)
    def act(n: int, word: tuple[int, ...]) -> tuple:
        out: dict[tuple[int, ...], Fraction] = {}

        def add(vec, coef):
            for w, a in vec:
                out[w] = out.get(w, 0) + coef * a

        if not word:
            if n <= -2:
                add([((-n,), Fraction(1))], 1)
        elif n < 0 and -n >= word[0]:
            add([((-n,) + word, Fraction(1))], 1)
        else:
            k, rest = word[0], word[1:]
            inner = act(n, rest)
            for w, a in inner:
                add(act(-k, w), a)
            add(act(n - k, rest), n + k)
            if n == k:
                add([(rest, Fraction(1))], c * (n**3 - n) / 12)
        return tuple((w, a) for w, a in out.items() if a)

    def parts(n, largest):
        if n == 0:
            yield ()
            return
        for k in range(min(n, largest), 1, -1):
            for p in parts(n - k, k):
                yield (k,) + p

    basis = list(parts(level, level))
    rows = []
    for lam in basis:
        row = []
        for mu in basis:
            vec = ((mu, Fraction(1)),)
            for k in lam:
                nxt: dict = {}
                for w, a in vec:
                    for w2, b in act(k, w):
                        nxt[w2] = nxt.get(w2, 0) + a * b
                vec = tuple(nxt.items())
            val = dict(vec).get((), Fraction(0))
            row.append(sympy.Rational(val.numerator, val.denominator))
        rows.append(row)
    return sympy.Matrix(rows)


def rational_matrix(G) -> sympy.Matrix:
    return sympy.Matrix([[sympy.Rational(Fraction(x).numerator, Fraction(x).denominator) for x in row] for row in G])


# -- criterion 1 ---------------------------------------------------------------


@pytest.mark.parametrize("kind", ["heisenberg", "virasoro c=1/2", "virasoro c=-22/5"])
def test_c01_borcherds_consistency(kind):
    start = time.perf_counter()
    model = {
        "heisenberg": lambda: build_heisenberg(8),
        "virasoro c=1/2": lambda: build_virasoro(C_HALF, 8),
        "virasoro c=-22/5": lambda: build_virasoro(C_YL, 8),
    }[kind]()
    blocks, ok = 0, True
    for u in model.generators:
        for v in model.generators:
            rep = borcherds_consistency(model, u, v)
            blocks += rep.blocks_compared
            ok &= rep.passed
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    record(1, ok, f"{kind}: {blocks} blocks equal exactly, {elapsed:.1f}s")
    assert ok


# -- criterion 2 ---------------------------------------------------------------


def test_c02_locality_order(heis8, vir_half, vir_yl):
    J = heis8.generator("J")
    jj = locality_order_check(heis8, J, J, trial=2)
    ok = jj.order == 2 and jj.holds_at_trial and not jj.inconclusive
    details = [f"(J,J) order {jj.order}"]
    for model in (vir_half, vir_yl):
        w = model.generators[0]
        ww = locality_order_check(model, w, w, trial=4)
        ok &= ww.order is not None and ww.order <= 4 and ww.holds_at_trial and not ww.inconclusive
        details.append(f"(w,w) c={model.params['c']} order {ww.order}")
    record(2, ok, ", ".join(details) + "; vanishing at d1+d2 exact")
    assert ok


# -- criterion 3 ---------------------------------------------------------------


def test_c03_mobius_axiom_exact(heis8, vir_yl):
    worst, checks = 0.0, 0
    for model in (heis8, vir_yl):
        for f in model.generators + [identity_field(model)]:
            rep = mobius_axiom_check(model, f)
            assert rep.checks > 0
            worst = max(worst, rep.max_deviation)
            checks += rep.checks
        for f in model.generators:
            for m in (-1, 0, 1):
                for n in range(-3, 4):
                    res = infinitesimal_covariance_check(model, f, LieElement.basis(m), TestFunction.e(n))
                    worst = max(worst, res.max_deviation)
                    checks += 1
    ok = worst == 0
    record(3, ok, f"{checks} exact checks, max deviation {worst}")
    assert ok


# -- criterion 4 ---------------------------------------------------------------


def test_c04_rotation_covariance(heis8, vir_yl):
    rng = np.random.default_rng(4)
    worst = 0.0
    for model in (heis8, vir_yl):
        for f in model.generators:
            for n in range(-6, 7):
                phi = float(rng.uniform(-math.pi, math.pi))
                res = covariance_check(model, f, MoebiusElement.rotation(phi), TestFunction.e(n), tol=1e-10)
                worst = max(worst, res.max_deviation)
    ok = worst < 1e-10
    record(4, ok, f"|n| <= 6, max deviation {worst:.2e}")
    assert ok


# -- criterion 5 ---------------------------------------------------------------


def test_c05_general_covariance():
    start = time.perf_counter()
    model = build_heisenberg(12, margin=4)
    J = model.generator("J")
    worst = 0.0
    for X in LieElement.real_basis():
        for t in (0.1, 0.3):
            res = covariance_check(model, J, exp_lie(X, t), TestFunction.e(1), tol=1e-6, band_out=16)
            worst = max(worst, res.max_deviation)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 120
    record(5, ok, f"max deviation {worst:.2e}, {elapsed:.1f}s")
    assert ok


# -- criterion 6 ---------------------------------------------------------------


def test_c06_roundtrip(heis8, vir_half, vir_yl, vir_yl_simple):
    ok, parts = True, []
    for model, expected in ((heis8, {"J": 1}), (vir_half, {"L": 2}), (vir_yl, {"L": 2}), (vir_yl_simple, {"L": 2})):
        rep = roundtrip_check(model)
        good = (
            rep.passed
            and rep.reconstructed_dims == expected
            and rep.states_match
            and rep.towers_match
            and rep.vacuum_match
            and rep.max_deviation == 0
        )
        ok &= good
        label = model.name + (f" c={model.params['c']}" if "c" in model.params else "")
        if model.params.get("simple"):
            label += " simple"
        parts.append(f"{label}: {rep.reconstructed_dims}")
    record(6, ok, "; ".join(parts))
    assert ok


# -- criterion 7 ---------------------------------------------------------------


def test_c07_forms(heis8, vir_half, vir_yl):
    theta = Involution.from_signs(heis8, {"J": -1})
    S = build_invariant_form(heis8, "sesquilinear", theta=theta)
    pd = True
    for n in range(7):
        M = rational_matrix(S.matrices[n])
        pd &= M == M.H and all(M[:k, :k].det() > 0 for k in range(1, M.rows + 1))
    assert involutive_structure_check(heis8, theta, S).unitary

    level2 = {}
    for model in (vir_half, vir_yl):
        G = build_invariant_form(model)
        c = sympy.Rational(model.params["c"].numerator, model.params["c"].denominator)
        # [L_2, L_-2] Omega = (4 L_0 + c (2^3 - 2) / 12) Omega
        level2[model.params["c"]] = rational_matrix(G.matrices[2])[0, 0] == c * (2**3 - 2) / 12
        assert G.is_symmetric()
    G_yl = build_invariant_form(vir_yl)
    kernel = [R.shape[0] for R in radical(G_yl)]
    brute = verma_gram(C_YL, 4)
    brute_kernel = brute.rows - brute.rank()
    symmetric = all(build_invariant_form(m).is_symmetric() for m in (heis8, vir_half, vir_yl))
    ok = pd and all(level2.values()) and kernel[4] == 1 and brute_kernel == 1 and symmetric
    record(
        7,
        ok,
        f"Heisenberg PD through 6: {pd}; level-2 = c/2: {all(level2.values())} "
        f"(value {G_yl.matrices[2][0, 0]} at c=-22/5); level-4 kernel {kernel[4]} (oracle {brute_kernel})",
    )
    assert ok


def test_verma_oracle_matches_library_gram(vir_yl):
    # the brute-force oracle agrees with the library level by level, up to basis order
    G = build_invariant_form(vir_yl)
    for n in range(2, 7):
        lib = rational_matrix(G.matrices[n])
        brute = verma_gram(C_YL, n)
        assert lib.rank() == brute.rank()
        assert lib.det() == brute.det()


# -- criterion 8 ---------------------------------------------------------------


def test_c08_form_correspondence(heis8, vir_yl):
    exact_ok = True
    float_dev = lr_dev = 0.0
    rng = np.random.default_rng(8)
    for model in (heis8, vir_yl):
        G = build_invariant_form(model)
        f = model.generators[0]
        d = f.dim
        for n in range(d, 5):
            # (v_{-n} Omega, v_{-n} Omega): Heisenberg (-1) n, Virasoro c (n^3 - n) / 12
            c = model.params.get("c")
            expect = -n if c is None else c * (n**3 - n) / 12
            w = [(f, TestFunction.e(-n))]
            vals = {s: extend_form_to_smeared(model, G, w, w, s) for s in ("direct", "left", "right")}
            exact_ok &= all(isinstance(v, Fraction) or isinstance(v, int) for v in vals.values())
            exact_ok &= all(v == expect for v in vals.values())
        for _ in range(3):
            a = {-n: complex(*rng.normal(size=2)) for n in range(d, 4)}
            b = {-n: complex(*rng.normal(size=2)) for n in range(d, 4)}
            w1, w2 = [(f, TestFunction(a, 4))], [(f, TestFunction(b, 4))]
            c = model.params.get("c")
            gram = sum(a[k] * b[k] * (k if c is None else float(c) * (-k**3 + k) / 12) for k in a)
            left = complex(extend_form_to_smeared(model, G, w1, w2, "left"))
            right = complex(extend_form_to_smeared(model, G, w1, w2, "right"))
            direct = complex(extend_form_to_smeared(model, G, w1, w2, "direct"))
            float_dev = max(float_dev, abs(direct - gram), abs(left - gram))
            lr_dev = max(lr_dev, abs(left - right))
    ok = exact_ok and float_dev < 1e-10 and lr_dev < 1e-12
    record(8, ok, f"e_n words exact: {exact_ok}; band-limited {float_dev:.1e}; left/right {lr_dev:.1e}")
    assert ok


# -- criterion 9 ---------------------------------------------------------------


def test_c09_reeh_schlieder():
    start = time.perf_counter()
    model = build_heisenberg(8)
    rep = reeh_schlieder_rank(model, (0.0, math.pi / 2), band=32, max_length=3, weight_cutoff=4, rel_tol=1e-8)
    elapsed = time.perf_counter() - start
    full = sum(int(sympy.partition(n)) for n in range(5))
    ok = rep.full_dim == full and rep.rank == full and rep.sigma_ratio > 1e-8 and elapsed < 60
    record(9, ok, f"K=3: rank {rep.rank} of {full}, sigma ratio {rep.sigma_ratio:.1e}, {elapsed:.1f}s")
    assert ok


def test_reeh_schlieder_longer_words_reach_full_rank():
    # J_{-1}^4 Omega needs four field factors
    model = build_heisenberg(8)
    rep = reeh_schlieder_rank(model, (0.0, math.pi / 2), band=32, max_length=4, weight_cutoff=4, rel_tol=1e-8)
    assert rep.rank == rep.full_dim == 12
    assert rep.sigma_ratio > 1e-8


# -- criterion 10 --------------------------------------------------------------


def test_c10_cyclicity_and_spectrum(heis8, vir_half, vir_yl, vir_yl_simple):
    ok, parts = True, []
    for model in (heis8, vir_half, vir_yl, vir_yl_simple):
        cyc = vacuum_cyclicity_check(model)
        spec = spectrum_check(model)
        ok &= cyc.passed and spec.passed
        expected = [n for n in range(model.N + 1) if model.dims[n]]
        ok &= spec.details["spectrum"] == expected
        parts.append(f"{model.name}: spectrum {spec.details['spectrum']}")
    ok &= spectrum_check(heis8).details["spectrum"] == list(range(9))
    record(10, ok, "; ".join(parts))
    assert ok


if __name__ == "__main__":
    import sys

    raise SystemExit(pytest.main([__file__, "-q", "-s", *sys.argv[1:]]))

"""Truncated Moebius vertex algebras built from generator OPE data.

A model is fixed by a finite list of quasiprimary generators ``v`` of
conformal dimension ``d`` together with the singular OPE coefficients
``u_(j) v`` for ``j >= 0``.  Modes of generators act on a PBW basis of
ordered monomials ``v^1_{n_1} ... v^k_{n_k} Omega`` (``n_1 <= ... <= n_k``,
each ``n_i <= -d_i``); products are straightened with the Borcherds
commutator formula.

Mode conventions: ``v_(m)`` is the coefficient of ``z^{-m-1}`` and
``v_n = v_(n+d-1)`` is the degree-shifted mode, mapping ``V(m)`` to
``V(m-n)``.  ``Field.mode`` is shifted, ``Field.umode`` unshifted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import TruncationError
from .graded import BlockOperator, GradedSpace, GradedVector, apply, exact_array

__all__ = [
    "OPETerm",
    "ModeAlgebra",
    "ModeTower",
    "Field",
    "Model",
    "partitions",
    "gbinom",
    "build_heisenberg",
    "build_virasoro",
    "identity_field",
    "field_from_state",
    "borcherds_product",
    "borcherds_commutator",
    "direct_commutator",
    "borcherds_consistency",
    "LocalityResult",
    "locality_order_check",
    "MobiusReport",
    "mobius_axiom_check",
]

Mode = tuple[int, int]  # (generator index, shifted mode n)
Monomial = tuple[Mode, ...]


def gbinom(top: int, j: int) -> int:
    """Binomial coefficient for any integer ``top`` and ``j >= 0``."""
    if j < 0:
        return 0
    num = 1
    for i in range(j):
        num *= top - i
    return num // math.factorial(j)


def partitions(n: int, min_part: int = 1, max_part: int | None = None) -> list[tuple[int, ...]]:
    """Partitions of ``n`` into parts in ``[min_part, max_part]``, non-increasing."""
    if max_part is None:
        max_part = n
    if n == 0:
        return [()]
    out = []
    for first in range(min(n, max_part), min_part - 1, -1):
        for rest in partitions(n - first, min_part, first):
            out.append((first,) + rest)
    return out


@dataclass(frozen=True)
class OPETerm:
    """``coef * L_{-1}^derivs gen`` (``gen=None`` is the vacuum)."""

    coef: Fraction
    gen: int | None
    derivs: int = 0


class ModeAlgebra:
    """Straightening engine for generator modes on the PBW monomial basis."""

    def __init__(self, names: Sequence[str], dims: Sequence[int], ope: Mapping[tuple[int, int], Mapping[int, Sequence[OPETerm]]]):
        self.names = tuple(names)
        self.dims = tuple(dims)
        self.ope = {k: {j: tuple(ts) for j, ts in v.items()} for k, v in ope.items()}
        self._apply = lru_cache(maxsize=None)(self._apply_uncached)
        self._bracket = lru_cache(maxsize=None)(self._bracket_uncached)

    # basic data -------------------------------------------------------
    def is_creation(self, x: Mode) -> bool:
        g, n = x
        return n <= -self.dims[g]

    @staticmethod
    def key(x: Mode) -> tuple[int, int]:
        return (x[1], x[0])

    @staticmethod
    def weight(mono: Monomial) -> int:
        return -sum(n for _, n in mono)

    def monomials(self, weight: int) -> list[Monomial]:
        """Ordered monomials of the given weight, lexicographically sorted."""
        out: list[Monomial] = []

        def rec(remaining: int, min_key: tuple[int, int], acc: list[Mode]):
            if remaining == 0:
                out.append(tuple(acc))
                return
            for n in range(-remaining, 0):
                for g, d in enumerate(self.dims):
                    if n > -d:
                        continue
                    x = (g, n)
                    if self.key(x) < min_key:
                        continue
                    acc.append(x)
                    rec(remaining + n, self.key(x), acc)
                    acc.pop()

        rec(weight, (-(10 ** 9), -1), [])
        return sorted(out, key=lambda m: tuple(self.key(x) for x in m))

    def label(self, mono: Monomial) -> str:
        if not mono:
            return "Omega"
        return " ".join(f"{self.names[g]}[{n}]" for g, n in mono) + " Omega"

    # commutators --------------------------------------------------------
    def _bracket_uncached(self, x: Mode, y: Mode) -> tuple[tuple[Fraction, Mode | None], ...]:
        """``[x, y]`` as a combination of single modes (``None`` = identity)."""
        a, m = x
        b, k = y
        da, db = self.dims[a], self.dims[b]
        terms: dict[Mode | None, Fraction] = {}
        for j, ts in self.ope.get((a, b), {}).items():
            coef_j = gbinom(m + da - 1, j)
            if coef_j == 0:
                continue
            s = m + k + da + db - 2 - j  # unshifted index of (a_(j) b)
            for t in ts:
                if t.gen is None:
                    if t.derivs == 0 and s == -1:
                        key = None
                        terms[key] = terms.get(key, Fraction(0)) + coef_j * t.coef
                    continue
                p = t.derivs
                # (L_{-1}^p c)_(s) = (-1)^p p! binom(s, p) c_(s-p)
                factor = (-1) ** p * math.factorial(p) * gbinom(s, p)
                if factor == 0:
                    continue
                key = (t.gen, m + k)
                terms[key] = terms.get(key, Fraction(0)) + coef_j * t.coef * factor
        return tuple((c, z) for z, c in terms.items() if c != 0)

    def bracket(self, x: Mode, y: Mode):
        return self._bracket(x, y)

    # action ---------------------------------------------------------------
    def _apply_uncached(self, x: Mode, mono: Monomial) -> tuple[tuple[Monomial, Fraction], ...]:
        if not mono:
            return (((x,), Fraction(1)),) if self.is_creation(x) else ()
        y, rest = mono[0], mono[1:]
        if self.is_creation(x) and self.key(x) <= self.key(y):
            return (((x,) + mono, Fraction(1)),)
        out: dict[Monomial, Fraction] = {}
        for m2, c2 in self._apply(x, rest):
            for m3, c3 in self._apply(y, m2):
                out[m3] = out.get(m3, Fraction(0)) + c2 * c3
        for c, z in self._bracket(x, y):
            if z is None:
                out[rest] = out.get(rest, Fraction(0)) + c
            else:
                for m2, c2 in self._apply(z, rest):
                    out[m2] = out.get(m2, Fraction(0)) + c * c2
        return tuple((m, c) for m, c in out.items() if c != 0)

    def apply_mode(self, x: Mode, vec: Mapping[Monomial, Fraction]) -> dict[Monomial, Fraction]:
        out: dict[Monomial, Fraction] = {}
        for mono, c in vec.items():
            for m2, c2 in self._apply(x, mono):
                out[m2] = out.get(m2, Fraction(0)) + c * c2
        return {m: c for m, c in out.items() if c != 0}

    def apply_word(self, word: Sequence[Mode], vec: Mapping[Monomial, Fraction]) -> dict[Monomial, Fraction]:
        """Apply ``word[0] word[1] ... word[-1]`` (rightmost first)."""
        for x in reversed(word):
            vec = self.apply_mode(x, vec)
        return vec


class ModeTower:
    """Lazily built, cached family ``n -> v_n`` of degree-shifted modes."""

    def __init__(self, dim: int, builder: Callable[[int], BlockOperator]):
        self.dim = dim
        self._builder = builder
        self._cache: dict[int, BlockOperator] = {}

    def __getitem__(self, n: int) -> BlockOperator:
        op = self._cache.get(n)
        if op is None:
            op = self._builder(n)
            self._cache[n] = op
        return op

    def trusted(self, n: int, window: Iterable[int]) -> BlockOperator:
        """Mode ``n``, raising :class:`TruncationError` if any window block is untrusted."""
        op = self[n]
        bad = [s for s in window if s in op.tail]
        if bad:
            raise TruncationError(f"mode {n} needs discarded data on source weights {bad}", index=n)
        return op


class Field:
    """A homogeneous state together with its vertex operator modes."""

    def __init__(self, name: str, state: GradedVector, dim: int, tower: ModeTower, quasiprimary: bool | None = None):
        self.name = name
        self.state = state
        self.dim = dim
        self.tower = tower
        self.quasiprimary = quasiprimary

    def mode(self, n: int) -> BlockOperator:
        """Degree-shifted mode ``v_n``."""
        return self.tower[n]

    def umode(self, m: int) -> BlockOperator:
        """Unshifted mode ``v_(m) = v_{m-d+1}``."""
        return self.tower[m - self.dim + 1]

    def __repr__(self) -> str:
        return f"Field({self.name!r}, dim={self.dim})"


@dataclass
class Model:
    """Truncated Moebius vertex algebra ``V(0) + ... + V(N)`` (exact scalars)."""

    name: str
    params: dict
    space: GradedSpace
    vacuum: GradedVector
    L: dict[int, BlockOperator]
    generators: list[Field]
    margin: int
    algebra: ModeAlgebra
    # per weight and basis index: (generator, shifted mode, lower-weight component)
    creation: list[list[tuple[int, int, np.ndarray]]] = field(repr=False, default_factory=list)
    labels: list[list[str]] = field(repr=False, default_factory=list)

    @property
    def N(self) -> int:
        return self.space.max_weight

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    def window(self, margin: int | None = None) -> list[int]:
        return list(self.space.window(self.margin if margin is None else margin))

    def generator(self, name: str) -> Field:
        for f in self.generators:
            if f.name == name:
                return f
        raise KeyError(name)

    def basis_vector(self, weight: int, index: int) -> GradedVector:
        return GradedVector.basis(self.space, weight, index)

    def to_json(self, include_blocks: bool = False) -> dict:
        out = {
            "name": self.name,
            "params": {k: str(v) for k, v in self.params.items()},
            "max_weight": self.N,
            "dims": list(self.dims),
            "margin": self.margin,
            "labels": self.labels,
            "generators": [
                {"name": g.name, "dim": g.dim, "quasiprimary": g.quasiprimary} for g in self.generators
            ],
        }
        if include_blocks:
            out["L"] = {str(m): op.to_json() for m, op in self.L.items()}
            out["modes"] = {
                g.name: {str(n): g.mode(n).to_json() for n in range(-self.N, self.N + 1)} for g in self.generators
            }
        return out


# ---------------------------------------------------------------------------
# model construction


def _mode_matrix(alg: ModeAlgebra, space: GradedSpace, basis: list[list[Monomial]], index: list[dict], x: Mode) -> BlockOperator:
    n = x[1]
    blocks, tail = {}, set()
    for s, monos in enumerate(basis):
        t = s - n
        if t < 0 or not monos:
            continue
        if t > space.max_weight:
            tail.add(s)
            continue
        if not basis[t]:
            continue
        b = np.empty((len(basis[t]), len(monos)), dtype=object)
        b.fill(Fraction(0))
        for j, mono in enumerate(monos):
            for m2, c in alg._apply(x, mono):
                b[index[t][m2], j] += c
        blocks[(t, s)] = b
    return BlockOperator(space, blocks, True, tail)


def derivation_images(alg: ModeAlgebra, m: int) -> Callable[[Monomial], dict[Monomial, Fraction]]:
    """``mono -> L_m mono`` from ``L_m Omega = 0`` and ``[L_m, v_n] = ((d-1) m - n) v_{m+n}``.

    Uses ``L_m (x rest) = [L_m, x] rest + x (L_m rest)``, memoized on monomials.
    """
    memo: dict[Monomial, dict[Monomial, Fraction]] = {(): {}}

    def image(mono: Monomial) -> dict[Monomial, Fraction]:
        hit = memo.get(mono)
        if hit is not None:
            return hit
        (g, n), rest = mono[0], mono[1:]
        out: dict[Monomial, Fraction] = {}
        coef = (alg.dims[g] - 1) * m - n
        if coef:
            for m2, c in alg._apply((g, m + n), rest):
                out[m2] = out.get(m2, 0) + coef * c
        for m1, c1 in image(rest).items():
            for m2, c2 in alg._apply((g, n), m1):
                out[m2] = out.get(m2, 0) + c1 * c2
        out = {k: v for k, v in out.items() if v != 0}
        memo[mono] = out
        return out

    return image


def _derivation_L(alg: ModeAlgebra, space: GradedSpace, basis, index, m: int) -> BlockOperator:
    image = derivation_images(alg, m)
    blocks, tail = {}, set()
    for s, monos in enumerate(basis):
        t = s - m
        if t < 0 or not monos:
            continue
        if t > space.max_weight:
            tail.add(s)
            continue
        b = np.empty((len(basis[t]), len(monos)), dtype=object)
        b.fill(Fraction(0))
        for j, mono in enumerate(monos):
            for m2, c in image(mono).items():
                b[index[t][m2], j] += c
        if b.size:
            blocks[(t, s)] = b
    return BlockOperator(space, blocks, True, tail)


def _build_universal(name: str, params: dict, alg: ModeAlgebra, N: int, margin: int | None) -> Model:
    basis = [alg.monomials(w) for w in range(N + 1)]
    index = [{m: i for i, m in enumerate(monos)} for monos in basis]
    labels = [[alg.label(m) for m in monos] for monos in basis]
    space = GradedSpace(tuple(len(b) for b in basis), tuple(tuple(l) for l in labels))
    vacuum = GradedVector.basis(space, 0, 0)
    L = {m: _derivation_L(alg, space, basis, index, m) for m in (-1, 0, 1)}

    generators = []
    for g, (gname, d) in enumerate(zip(alg.names, alg.dims)):
        tower = ModeTower(d, lambda n, g=g: _mode_matrix(alg, space, basis, index, (g, n)))
        if d <= N:
            state = GradedVector.basis(space, d, index[d][((g, -d),)])
        else:
            state = GradedVector.zero(space)
        generators.append(Field(gname, state, d, tower, quasiprimary=True))

    creation = []
    for w, monos in enumerate(basis):
        row = []
        for mono in monos:
            if not mono:
                row.append((-1, 0, np.zeros(0, dtype=object)))
                continue
            (g, n), rest = mono[0], mono[1:]
            lw = w + n
            comp = np.empty(len(basis[lw]), dtype=object)
            comp.fill(Fraction(0))
            comp[index[lw][rest]] = Fraction(1)
            row.append((g, n, comp))
        creation.append(row)

    if margin is None:
        margin = max(alg.dims) + 2
    model = Model(name, params, space, vacuum, L, generators, margin, alg, creation, labels)
    model._basis = basis  # type: ignore[attr-defined]
    model._index = index  # type: ignore[attr-defined]
    return model


def heisenberg_algebra() -> ModeAlgebra:
    # J_(1) J = Omega, J_(0) J = 0
    return ModeAlgebra(["J"], [1], {(0, 0): {1: [OPETerm(Fraction(1), None)]}})


def virasoro_algebra(c: Fraction) -> ModeAlgebra:
    # w_(0) w = L_{-1} w, w_(1) w = 2 w, w_(2) w = 0, w_(3) w = (c/2) Omega
    return ModeAlgebra(
        ["L"],
        [2],
        {
            (0, 0): {
                0: [OPETerm(Fraction(1), 0, 1)],
                1: [OPETerm(Fraction(2), 0, 0)],
                3: [OPETerm(Fraction(c) / 2, None)],
            }
        },
    )


def build_heisenberg(N: int, margin: int | None = None) -> Model:
    """Heisenberg model: ``V(n)`` has a basis indexed by partitions of ``n``."""
    if N < 0:
        raise ValueError("N must be non-negative")
    return _build_universal("heisenberg", {}, heisenberg_algebra(), N, margin)


def build_virasoro(c, N: int, simple: bool = False, margin: int | None = None) -> Model:
    """Virasoro vacuum model at central charge ``c`` (exact rational).

    With ``simple=True`` each ``V(n)`` is replaced by its quotient by the
    radical of the invariant bilinear form normalized by ``(Omega, Omega) = 1``.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    c = Fraction(c)
    model = _build_universal("virasoro", {"c": c, "simple": False}, virasoro_algebra(c), N, margin)
    if simple:
        from .forms import build_invariant_form, quotient_model

        model = quotient_model(model, build_invariant_form(model))
        model.params = {"c": c, "simple": True}
    return model


# ---------------------------------------------------------------------------
# fields from states


def identity_field(model: Model) -> Field:
    """``Y(Omega, z) = id``."""
    space = model.space
    ident = BlockOperator.identity(space)

    def build(n: int) -> BlockOperator:
        return ident if n == 0 else BlockOperator.zero(space)

    return Field("1", model.vacuum, 0, ModeTower(0, build), quasiprimary=True)


def _bpf_mode(u: Field, p: int, v: Field, k: int, N: int) -> BlockOperator:
    """Unshifted mode ``(u_(p) v)_(k)`` by the Borcherds product formula."""
    space = u.state.space
    result = BlockOperator.zero(space)
    jmax = max(N + v.dim - k - 1, N + u.dim - 1, 0)
    if p >= 0:
        jmax = min(jmax, p)
    sign_p = -1 if p % 2 else 1
    for j in range(jmax + 1):
        b = gbinom(p, j)
        if b == 0:
            continue
        coef = b if j % 2 == 0 else -b
        t1 = u.umode(p - j) @ v.umode(k + j)
        t2 = v.umode(p + k - j) @ u.umode(j)
        result = result + (t1 - t2.scale(sign_p)).scale(coef)
    return result


def borcherds_product(u: Field, n: int, v: Field) -> Field:
    """Field of the state ``u_(n) v`` with modes from the Borcherds product formula.

    Modes whose evaluation needed discarded intermediate weights carry those
    source weights in ``tail``; use ``ModeTower.trusted`` to turn that into a
    :class:`TruncationError`.
    """
    space = u.state.space
    N = space.max_weight
    state = apply(u.umode(n), v.state)
    dim = u.dim + v.dim - n - 1
    tower = ModeTower(dim, lambda k: _bpf_mode(u, n, v, k + dim - 1, N))
    return Field(f"{u.name}_({n}){v.name}", state, dim, tower)


def field_from_state(model: Model, state: GradedVector, name: str = "v") -> Field:
    """Vertex operator of a homogeneous state, built from the generators by BPF."""
    weights = state.weights()
    if len(weights) > 1:
        raise ValueError("state must be homogeneous")
    if not weights:
        zero = BlockOperator.zero(model.space)
        return Field(name, state, 0, ModeTower(0, lambda n: zero))
    h = weights[0]
    cache = _basis_fields(model)
    comp = state.components[h]
    parts = [(c, cache(h, i)) for i, c in enumerate(comp) if c != 0]

    def build(n: int) -> BlockOperator:
        op = BlockOperator.zero(model.space)
        for c, f in parts:
            op = op + f.mode(n).scale(c)
        return op

    return Field(name, state, h, ModeTower(h, build))


def _basis_fields(model: Model):
    store = model.__dict__.setdefault("_basis_field_cache", {})

    def get(w: int, i: int) -> Field:
        key = (w, i)
        if key in store:
            return store[key]
        if w == 0:
            f = identity_field(model)
        else:
            g, n, lower = model.creation[w][i]
            gen = model.generators[g]
            lw = w + n
            if sum(1 for x in lower if x != 0) == 1 and lw >= 0:
                j = next(idx for idx, x in enumerate(lower) if x != 0)
                inner = get(lw, j) if lower[j] == 1 else None
            else:
                inner = None
            if inner is None:
                inner = field_from_state(model, GradedVector.from_component(model.space, lw, lower))
            f = borcherds_product(gen, n + gen.dim - 1, inner)
        store[key] = f
        return f

    return get


# ---------------------------------------------------------------------------
# commutator identities


def direct_commutator(u: Field, v: Field, m: int, k: int) -> BlockOperator:
    """``[u_(m), v_(k)]`` by composing the mode matrices."""
    return u.umode(m) @ v.umode(k) - v.umode(k) @ u.umode(m)


def _cached_product(u: Field, j: int, v: Field) -> Field:
    # keyed on id(v); the stored tuple keeps v alive so the id is not reused
    store = u.__dict__.setdefault("_products", {})
    hit = store.get((j, id(v)))
    if hit is None:
        hit = (v, borcherds_product(u, j, v))
        store[(j, id(v))] = hit
    return hit[1]


def borcherds_commutator(u: Field, v: Field, m: int, k: int) -> BlockOperator:
    """``sum_j binom(m, j) (u_(j) v)_(m+k-j)`` over ``j >= 0`` (unshifted modes)."""
    space = u.state.space
    result = BlockOperator.zero(space)
    jmax = u.dim + v.dim - 1  # u_(j) v has negative weight beyond this
    for j in range(jmax + 1):
        b = gbinom(m, j)
        if b == 0:
            continue
        prod = _cached_product(u, j, v)
        if prod.state.is_zero():
            continue
        result = result + prod.umode(m + k - j).scale(b)
    return result


@dataclass
class ConsistencyReport:
    pairs_checked: int
    blocks_compared: int
    failures: list[tuple]
    skipped_blocks: int

    @property
    def passed(self) -> bool:
        return not self.failures and self.blocks_compared > 0


def borcherds_consistency(model: Model, u: Field, v: Field, mode_range: Iterable[int] | None = None) -> ConsistencyReport:
    """Compare the Borcherds commutator with the direct commutator, shifted modes ``(m, k)``.

    Only source weights in the trusted window whose evaluation on both sides
    avoided truncation are compared; they must agree exactly.
    """
    window = model.window()
    modes = list(range(-model.N, model.N + 1)) if mode_range is None else list(mode_range)
    failures, compared, skipped, pairs = [], 0, 0, 0
    for m in modes:
        for k in modes:
            mu, kv = m + u.dim - 1, k + v.dim - 1
            lhs = direct_commutator(u, v, mu, kv)
            rhs = borcherds_commutator(u, v, mu, kv)
            pairs += 1
            for s in window:
                t = s - m - k
                if t < 0 or t > model.N:
                    continue
                if s in lhs.tail or s in rhs.tail:
                    skipped += 1
                    continue
                compared += 1
                if not lhs.equals(rhs, [s], [t]):
                    failures.append((m, k, s))
    return ConsistencyReport(pairs, compared, failures, skipped)


@dataclass
class LocalityResult:
    order: int | None
    holds_at_trial: bool
    inconclusive: bool
    blocks_compared: int
    trial: int


def _locality_vanishes(u: Field, v: Field, order: int, window: list[int], pq: Iterable[tuple[int, int]], N: int):
    compared = 0
    inconclusive = False
    for p, q in pq:
        total = BlockOperator.zero(u.state.space)
        for i in range(order + 1):
            c = gbinom(order, i) * (-1) ** i
            total = total + direct_commutator(u, v, p + order - i, q + i).scale(c)
        for s in window:
            if s in total.tail:
                inconclusive = True
                continue
            compared += 1
            if not total.is_zero([s]):
                return False, compared, inconclusive
    return True, compared, inconclusive


def locality_order_check(
    model: Model,
    u: Field,
    v: Field,
    trial: int | None = None,
    pq_range: Iterable[int] | None = None,
    max_order: int | None = None,
) -> LocalityResult:
    """Least ``N`` with ``sum_i (-1)^i binom(N, i) [u_(p+N-i), v_(q+i)] = 0`` on the window.

    ``trial`` defaults to ``d_u + d_v`` (the pole-order bound); ``(p, q)`` run
    over ``pq_range`` squared.  Blocks that touch discarded weights are not
    compared; if a trial order can only be decided on such blocks the result is
    marked inconclusive.
    """
    window = model.window()
    trial = u.dim + v.dim if trial is None else trial
    rng = list(range(-model.N, model.N + 1)) if pq_range is None else list(pq_range)
    pq = [(p, q) for p in rng for q in rng]
    top = max(trial, u.dim + v.dim) if max_order is None else max_order
    found = None
    compared_total = 0
    any_inconclusive = False
    for order in range(top + 1):
        ok, compared, inconclusive = _locality_vanishes(u, v, order, window, pq, model.N)
        compared_total += compared
        any_inconclusive |= inconclusive
        if ok and compared > 0:
            found = order
            break
    holds, compared, inconclusive = _locality_vanishes(u, v, trial, window, pq, model.N)
    return LocalityResult(
        order=found,
        holds_at_trial=holds and compared > 0,
        inconclusive=compared == 0,
        blocks_compared=compared_total,
        trial=trial,
    )


@dataclass
class MobiusReport:
    field: str
    checks: int = 0
    violations: list[tuple] = field(default_factory=list)
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations and self.checks > 0

    @property
    def max_deviation(self) -> float:
        return max((abs(float(v[-1])) for v in self.violations), default=0.0)


def mobius_axiom_check(model: Model, f: Field, mode_range: Iterable[int] | None = None) -> MobiusReport:
    """Exact per-mode check of the sl2 axiom.

    Verifies ``[L_m, v_(k)] = sum_j binom(m+1, j) (L_{j-1} v)_(m+k+1-j)`` for
    ``m = -1, 0, 1`` (which for a quasiprimary ``v`` is
    ``[L_m, v_n] = ((d-1) m - n) v_{m+n}``) and ``(L_{-1} v)_n = -(n+d) v_n``.
    """
    window = model.window()
    rep = MobiusReport(f.name)
    modes = list(range(-model.N, model.N + 1)) if mode_range is None else list(mode_range)
    Lv = {j: field_from_state(model, apply(model.L[j - 1], f.state), f"L{j - 1}{f.name}") for j in range(3)}

    def compare(lhs: BlockOperator, rhs: BlockOperator, shift: int, tag):
        for s in window:
            t = s - shift
            if t < 0 or t > model.N:
                continue
            if s in lhs.tail or s in rhs.tail:
                rep.skipped += 1
                continue
            rep.checks += 1
            if not lhs.equals(rhs, [s], [t]):
                rep.violations.append(tag + (s, lhs.max_deviation(rhs, [s], [t])))

    for m in (-1, 0, 1):
        for n in modes:
            k = n + f.dim - 1
            lhs = model.L[m].commutator(f.umode(k))
            rhs = BlockOperator.zero(model.space)
            for j in range(m + 2):
                b = gbinom(m + 1, j)
                if b and not Lv[j].state.is_zero():
                    rhs = rhs + Lv[j].umode(m + k + 1 - j).scale(b)
            compare(lhs, rhs, m + n, ("L", m, n))
            if f.quasiprimary:
                alt = f.mode(m + n).scale((f.dim - 1) * m - n)
                compare(lhs, alt, m + n, ("qp", m, n))
    for n in modes:
        lhs = Lv[0].mode(n)
        rhs = f.mode(n).scale(-(n + f.dim))
        compare(lhs, rhs, n, ("d/dz", n))
    return rep

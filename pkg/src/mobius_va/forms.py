"""Invariant bilinear and sesquilinear forms, opposite fields, involutions.

Gram matrices are computed from generator adjunction alone: a basis vector
``g_n w`` (``n < 0``) pairs with ``u`` as ``(-1)^d (w, g_{-n} u)``, which
recurses to lower weight.  For quasiprimary generators this suffices for the
full invariance property; :func:`invariance_check` re-verifies everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circle import MoebiusElement, TestFunction, alpha_automorphism, reflect_transform
from .graded import (
    BlockOperator,
    GradedSpace,
    GradedVector,
    StructureError,
    apply,
    exact_det,
    exact_nullspace,
    exact_rank,
    exact_rref,
    to_complex,
)
from .vertex import Field, Model, ModeTower, field_from_state

__all__ = [
    "GramTower",
    "Involution",
    "opposite_tower",
    "opposite_field",
    "build_invariant_form",
    "pair",
    "InvarianceReport",
    "invariance_check",
    "radical",
    "quotient_model",
    "UnitarityReport",
    "involutive_structure_check",
    "extend_form_to_smeared",
]


@dataclass
class GramTower:
    """Per-weight Gram matrices of an invariant form (block diagonal by weight)."""

    kind: str  # "bilinear" or "sesquilinear"
    matrices: list[np.ndarray]
    normalization: Fraction

    @property
    def exact(self) -> bool:
        return all(m.dtype == object for m in self.matrices)

    def __getitem__(self, n: int) -> np.ndarray:
        return self.matrices[n]

    def is_symmetric(self) -> bool:
        return all(_exact_equal(G, G.T) for G in self.matrices)

    def is_hermitian(self) -> bool:
        return all(_exact_equal(G, _conj(G).T) for G in self.matrices)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "normalization": str(self.normalization),
            "levels": [
                {"weight": n, "entries": [[str(x) for x in row] for row in G]} for n, G in enumerate(self.matrices)
            ],
        }


def _conj(arr: np.ndarray) -> np.ndarray:
    return arr if arr.dtype == object else arr.conj()


def _exact_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and all(x == y for x, y in zip(a.flat, b.flat))


def pair(tower: GramTower, u: GradedVector, w: GradedVector, weights: Iterable[int] | None = None):
    """``(u, w)``; antilinear in ``w`` for sesquilinear towers."""
    ws = range(len(tower.matrices)) if weights is None else weights
    exact = u.exact and w.exact and tower.exact
    total = Fraction(0) if exact else 0j
    for n in ws:
        G = tower.matrices[n]
        if G.size == 0:
            continue
        a, b = u.components[n], w.components[n]
        if not exact:
            a, b, G = np.asarray(a, complex), np.asarray(b, complex), np.asarray(G, complex)
            if tower.kind == "sesquilinear":
                b = b.conj()
            total += complex(a @ G @ b)
        else:
            total += (a @ G @ b) if a.size else 0
    return total


@dataclass
class Involution:
    """Antilinear involution fixed by its values on the generators.

    ``images[g]`` lists ``(coef, h)`` with ``theta(v_g) = sum coef * v_h``.
    ``matrices[n]`` is the real-linear part on ``V(n)`` (theta = matrix o conj).
    """

    images: dict[int, list[tuple[Fraction, int]]]
    matrices: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def from_signs(cls, model: Model, signs: Mapping[str, int]) -> "Involution":
        images = {i: [(Fraction(signs[g.name]), i)] for i, g in enumerate(model.generators)}
        return cls(images).realize(model)

    def realize(self, model: Model) -> "Involution":
        mats = [np.array([[Fraction(1)]], dtype=object)]
        for w in range(1, model.N + 1):
            cols = []
            for g, n, lower in model.creation[w]:
                lw = w + n
                img_lower = mats[lw] @ _conj(lower) if lower.size else lower
                col = np.empty(model.dims[w], dtype=object)
                col.fill(Fraction(0))
                for coef, h in self.images[g]:
                    blk = model.generators[h].mode(n).block(w, lw)
                    col = col + coef * (blk @ img_lower)
                cols.append(col)
            M = np.empty((model.dims[w], model.dims[w]), dtype=object)
            for j, col in enumerate(cols):
                M[:, j] = col
            mats.append(M)
        self.matrices = mats
        return self

    def apply(self, v: GradedVector) -> GradedVector:
        comps = [M @ _conj(c) for M, c in zip(self.matrices, v.components)]
        return GradedVector(v.space, comps, v.exact, v.tail)

    def image_mode(self, model: Model, g: int, n: int) -> BlockOperator:
        """``(theta v_g)_n``."""
        op = BlockOperator.zero(model.space)
        for coef, h in self.images[g]:
            op = op + model.generators[h].mode(n).scale(coef)
        return op


# ---------------------------------------------------------------------------
# opposite fields


def opposite_tower(model: Model, f: Field, quasiprimary: bool | None = None) -> ModeTower:
    """Modes of ``Y^o(v, z) = Y(e^{z L_1} (-z^{-2})^{L_0} v, z^{-1})``.

    For quasiprimary ``v`` the shifted mode is ``(-1)^d v_{-n}``; otherwise
    ``(-1)^d sum_k (L_1^k v)_{-n} / k!`` (finite since ``L_1`` lowers weight).
    """
    qp = f.quasiprimary if quasiprimary is None else quasiprimary
    sign = -1 if f.dim % 2 else 1
    if qp:
        return ModeTower(f.dim, lambda n: f.mode(-n).scale(sign))
    parts = []
    state = f.state
    for k in range(f.dim + 1):
        if state.is_zero():
            break
        parts.append((Fraction(sign, math.factorial(k)), field_from_state(model, state, f"L1^{k}{f.name}")))
        state = apply(model.L[1], state)

    def build(n: int) -> BlockOperator:
        op = BlockOperator.zero(model.space)
        for c, g in parts:
            op = op + g.mode(-n).scale(c)
        return op

    return ModeTower(f.dim, build)


def opposite_field(model: Model, f: Field) -> Field:
    return Field(f"{f.name}^o", f.state, f.dim, opposite_tower(model, f), f.quasiprimary)


# ---------------------------------------------------------------------------
# Gram towers


def build_invariant_form(
    model: Model,
    kind: str = "bilinear",
    normalization=1,
    theta: Involution | None = None,
) -> GramTower:
    """Gram tower of the invariant form with ``(Omega, Omega) = normalization``.

    Bilinear: ``(g_n w, u) = (-1)^d (w, g_{-n} u)``.  Sesquilinear (needs
    ``theta``): ``<g_n w, u> = (-1)^d <w, (theta g)_{-n} u>``.
    """
    if kind not in ("bilinear", "sesquilinear"):
        raise ValueError(f"unknown kind {kind!r}")
    if kind == "sesquilinear" and theta is None:
        raise ValueError("sesquilinear forms need an involution")
    if model.dims[0] != 1:
        raise StructureError("V(0) must be one-dimensional; pass its form explicitly")
    norm = Fraction(normalization)
    mats = [np.array([[norm]], dtype=object)]
    for w in range(1, model.N + 1):
        rows = []
        for g, n, lower in model.creation[w]:
            lw = w + n
            gen = model.generators[g]
            sign = -1 if gen.dim % 2 else 1
            if kind == "bilinear":
                op = gen.mode(-n)
            else:
                op = theta.image_mode(model, g, -n)
            blk = op.block(lw, w)
            row = sign * (lower @ mats[lw] @ _conj(blk)) if lower.size else np.zeros(model.dims[w], dtype=object)
            rows.append(row)
        G = np.empty((model.dims[w], model.dims[w]), dtype=object)
        for i, row in enumerate(rows):
            G[i, :] = row
        mats.append(G)
    return GramTower(kind, mats, norm)


def radical(tower: GramTower) -> list[np.ndarray]:
    """Exact kernel basis (rows) of every Gram matrix."""
    return [exact_nullspace(G) for G in tower.matrices]


def quotient_model(model: Model, tower: GramTower) -> Model:
    """Quotient of ``model`` by the radical of ``tower``, weight by weight."""
    from .vertex import Model as _Model

    proj, sect, labels, keep_by_weight = [], [], [], []
    for w, G in enumerate(tower.matrices):
        d = model.dims[w]
        R = exact_nullspace(G)
        if R.shape[0]:
            rref, piv = exact_rref(R)
        else:
            rref, piv = np.zeros((0, d), dtype=object), ()
        keep = [j for j in range(d) if j not in piv]
        P = np.empty((len(keep), d), dtype=object)
        P.fill(Fraction(0))
        S = np.empty((d, len(keep)), dtype=object)
        S.fill(Fraction(0))
        for i, j in enumerate(keep):
            P[i, j] = Fraction(1)
            S[j, i] = Fraction(1)
        for r, p in enumerate(piv):
            for i, j in enumerate(keep):
                P[i, p] = -rref[r, j]
        proj.append(P)
        sect.append(S)
        labels.append([model.labels[w][j] for j in keep])
        keep_by_weight.append(set(keep))
    space = GradedSpace(tuple(len(l) for l in labels), tuple(tuple(l) for l in labels))

    def compress(op: BlockOperator) -> BlockOperator:
        blocks = {}
        for (m, n), b in op.blocks.items():
            if proj[m].shape[0] and sect[n].shape[1]:
                blocks[(m, n)] = proj[m] @ b @ sect[n]
        return BlockOperator(space, blocks, op.exact, op.tail)

    def compress_vec(v: GradedVector) -> GradedVector:
        return GradedVector(space, [P @ c for P, c in zip(proj, v.components)], v.exact, v.tail)

    gens = [
        Field(g.name, compress_vec(g.state), g.dim, ModeTower(g.dim, lambda n, g=g: compress(g.mode(n))), g.quasiprimary)
        for g in model.generators
    ]
    creation = []
    for w in range(model.N + 1):
        row = []
        for j in range(model.dims[w]):
            if j in keep_by_weight[w]:
                g, n, lower = model.creation[w][j]
                row.append((g, n, proj[w + n] @ lower if w else lower))
        creation.append(row)
    L = {m: compress(op) for m, op in model.L.items()}
    vacuum = compress_vec(model.vacuum)
    out = _Model(model.name, dict(model.params), space, vacuum, L, gens, model.margin, model.algebra, creation, labels)
    # coordinates relative to the parent: quotient = proj @ parent, parent section = sect @ quotient
    out._quotient = (proj, sect)  # type: ignore[attr-defined]
    return out


# ---------------------------------------------------------------------------
# invariance


@dataclass
class InvarianceReport:
    checks: dict[str, int] = field(default_factory=dict)
    violations: list[tuple] = field(default_factory=list)
    max_deviation: float = 0.0

    def count(self, name: str, n: int = 1):
        self.checks[name] = self.checks.get(name, 0) + n

    @property
    def passed(self) -> bool:
        return not self.violations and sum(self.checks.values()) > 0


def _bilinear_matrices(tower: GramTower, theta: Involution | None) -> list[np.ndarray]:
    if tower.kind == "bilinear":
        return tower.matrices
    if theta is None:
        raise ValueError("sesquilinear tower needs theta to form the bilinear form")
    # (u, w) := <u, theta w>
    return [G @ _conj(T) if G.size else G for G, T in zip(tower.matrices, theta.matrices)]


def _adjoint_ok(A: np.ndarray, Gt: np.ndarray, Gs: np.ndarray, B: np.ndarray, sign: int):
    """``A^T G_t == sign * G_s B`` (exact) for ``A: V(s) -> V(t)``, ``B: V(t) -> V(s)``."""
    lhs = A.T @ Gt
    rhs = sign * (Gs @ B)
    if lhs.dtype == object and rhs.dtype == object:
        return _exact_equal(lhs, rhs), 0.0
    dev = float(np.max(np.abs(np.asarray(lhs, complex) - np.asarray(rhs, complex)))) if lhs.size else 0.0
    return dev == 0.0, dev


def invariance_check(
    model: Model,
    tower: GramTower,
    theta: Involution | None = None,
    smeared: Sequence[TestFunction] = (),
    gammas: Sequence[MoebiusElement] = (),
    group_tol: float = 1e-8,
) -> InvarianceReport:
    """Verify invariance identities of a (bilinear) form on the trusted window.

    Mode adjunction for generators, ``L_n`` adjunction, the smeared identity
    ``(phi(f) a, b) = (a, (-1)^d phi(f o 1/z) b)`` for each ``f`` in ``smeared``
    and ``(U(g) a, U(alpha g) b) = (a, b)`` for each ``g`` in ``gammas``.
    """
    from .wightman import _window_columns, smear, u_of_gamma, working_truncation

    G = _bilinear_matrices(tower, theta)
    rep = InvarianceReport()
    window = model.window()
    N = model.N

    # block diagonality is built in; L_0 adjunction checks it is consistent
    for m in (-1, 0, 1):
        for s in window:
            t = s - m
            if not 0 <= t <= N:
                continue
            ok, dev = _adjoint_ok(model.L[m].block(t, s), G[t], G[s], model.L[-m].block(s, t), 1)
            rep.count(f"L{m}")
            if not ok:
                rep.violations.append(("L", m, s))
    for gen in model.generators:
        sign = -1 if gen.dim % 2 else 1
        for n in range(-N, N + 1):
            for s in window:
                t = s - n
                if not 0 <= t <= N:
                    continue
                ok, dev = _adjoint_ok(gen.mode(n).block(t, s), G[t], G[s], gen.mode(-n).block(s, t), sign)
                rep.count(f"mode:{gen.name}")
                if not ok:
                    rep.violations.append(("mode", gen.name, n, s))
    for f in smeared:
        for gen in model.generators:
            sign = -1 if gen.dim % 2 else 1
            A = smear(gen, f).operator
            B = smear(gen, reflect_transform(f, "invert")).operator.scale(sign)
            for s in window:
                for t in range(N + 1):
                    ok, dev = _adjoint_ok(A.block(t, s), G[t], G[s], B.block(s, t), 1)
                    rep.count("smeared")
                    rep.max_deviation = max(rep.max_deviation, dev)
                    if not ok and dev > 1e-12:
                        rep.violations.append(("smeared", gen.name, s, t, dev))
    if gammas and tower.kind != "bilinear":
        raise ValueError("the group identity is checked for bilinear towers")
    for gamma in gammas:
        rep_u = u_of_gamma(model, gamma)
        rep_v = u_of_gamma(model, alpha_automorphism(gamma), rep_u.pad)
        work = working_truncation(model, rep_u.pad)
        rep_u.work = rep_v.work = work
        Gw = work.gram_blocks(tower.normalization)
        W, idx = _window_columns(work, window)
        A, B = rep_u.apply_work(W), rep_v.apply_work(W)
        acc = np.zeros((W.shape[1], W.shape[1]), dtype=complex)
        for w in range(work.N + 1):
            sl = slice(work.offsets[w], work.offsets[w + 1])
            acc += A[sl].T @ Gw[w] @ B[sl]
        target = np.zeros_like(acc)
        pos = 0
        for w in window:
            d = model.dims[w]
            target[pos:pos + d, pos:pos + d] = np.asarray(to_complex(G[w]))
            pos += d
        dev = float(np.max(np.abs(acc - target))) if acc.size else 0.0
        rep.count("group")
        rep.max_deviation = max(rep.max_deviation, dev)
        if dev > group_tol:
            rep.violations.append(("group", dev))
    return rep


# ---------------------------------------------------------------------------
# involutive / unitary structure


@dataclass
class UnitarityReport:
    theta_involutive: bool
    theta_fixes_vacuum: bool
    theta_intertwines: bool
    theta_preserves_form: bool
    hermitian: bool
    bilinear_invariant: bool
    normalized: bool
    positive_definite: list[bool]
    positive_semidefinite: list[bool]
    null_dims: list[int]
    first_failing_minor: tuple[int, int] | None

    @property
    def unitary(self) -> bool:
        return (
            self.normalized
            and all(self.positive_definite)
            and self.structure_ok
        )

    @property
    def unitary_after_quotient(self) -> bool:
        return self.normalized and all(self.positive_semidefinite) and self.structure_ok

    @property
    def structure_ok(self) -> bool:
        return (
            self.theta_involutive
            and self.theta_fixes_vacuum
            and self.theta_intertwines
            and self.theta_preserves_form
            and self.hermitian
            and self.bilinear_invariant
        )


def leading_minors(G: np.ndarray) -> list[Fraction]:
    return [exact_det(G[:k, :k]) for k in range(1, G.shape[0] + 1)]


def _psd(G: np.ndarray) -> bool:
    """Exact: positive definite on a complement of the kernel."""
    if G.shape[0] == 0:
        return True
    R = exact_nullspace(G)
    if R.shape[0]:
        _, piv = exact_rref(R)
        keep = [j for j in range(G.shape[0]) if j not in piv]
        G = G[np.ix_(keep, keep)]
    return all(m > 0 for m in leading_minors(G))


def involutive_structure_check(model: Model, theta: Involution, tower: GramTower) -> UnitarityReport:
    """Exact verification of an involutive structure and the unitarity verdict."""
    if tower.kind != "sesquilinear":
        raise ValueError("involutive_structure_check needs a sesquilinear tower")
    window = model.window()
    T = theta.matrices
    involutive = all(_exact_equal(M @ _conj(M), np.eye(M.shape[0], dtype=int).astype(object) * Fraction(1)) for M in T)
    fixes_vacuum = theta.apply(model.vacuum).equals(model.vacuum)
    intertwines = True
    for g, gen in enumerate(model.generators):
        for n in range(-model.N, model.N + 1):
            img = theta.image_mode(model, g, n)
            for s in window:
                t = s - n
                if not 0 <= t <= model.N:
                    continue
                lhs = T[t] @ _conj(gen.mode(n).block(t, s))
                rhs = img.block(t, s) @ T[s]
                if not _exact_equal(lhs, rhs):
                    intertwines = False
    preserves = all(_exact_equal(M.T @ G @ _conj(M), G.T) for M, G in zip(T, tower.matrices))
    bil = invariance_check(model, tower, theta)
    pd, psd, nulls = [], [], []
    first_fail = None
    for n, G in enumerate(tower.matrices):
        minors = leading_minors(G)
        ok = all(m > 0 for m in minors)
        pd.append(ok)
        if not ok and first_fail is None:
            first_fail = (n, next(i + 1 for i, m in enumerate(minors) if m <= 0))
        psd.append(_psd(G))
        nulls.append(G.shape[0] - exact_rank(G))
    return UnitarityReport(
        theta_involutive=involutive,
        theta_fixes_vacuum=fixes_vacuum,
        theta_intertwines=intertwines,
        theta_preserves_form=preserves,
        hermitian=tower.is_hermitian(),
        bilinear_invariant=bil.passed,
        normalized=tower.matrices[0][0, 0] == 1,
        positive_definite=pd,
        positive_semidefinite=psd,
        null_dims=nulls,
        first_failing_minor=first_fail,
    )


# ---------------------------------------------------------------------------
# extension to smeared words


def extend_form_to_smeared(
    model: Model,
    tower: GramTower,
    word1: Sequence[tuple[Field, TestFunction]],
    word2: Sequence[tuple[Field, TestFunction]],
    side: str = "left",
):
    """``(phi_1(f_1)...phi_k(f_k) Omega, psi_1(g_1)...psi_l(g_l) Omega)``.

    ``left``: ``(psi^o(g_l)...psi^o(g_1) phi_1(f_1)...Omega, Omega)``;
    ``right``: ``(Omega, phi^o(f_k)...phi^o(f_1) psi_1(g_1)...Omega)``;
    ``direct``: Gram pairing of the two word vectors.
    Raises :class:`TruncationError` when a word leaves the truncation.
    """
    from .errors import TruncationError
    from .wightman import apply_word

    if tower.kind != "bilinear":
        raise ValueError("extension is defined for bilinear towers")

    def opp(word):
        return [(opposite_field(model, f), g) for f, g in word]

    if side == "direct":
        a = apply_word(model, word1, model.vacuum)
        b = apply_word(model, word2, model.vacuum)
        # the form is weight-diagonal: one side must lie wholly inside the
        # truncation, the other only needs to be right on weights 0..N
        complete = model.N + 1
        if min(a.trusted_below, b.trusted_below) < complete or (a.discarded and b.discarded):
            raise TruncationError("word vector left the truncation")
        return pair(tower, a.vector, b.vector)
    if side == "left":
        res = apply_word(model, list(reversed(opp(word2))) + list(word1), model.vacuum)
    elif side == "right":
        res = apply_word(model, list(reversed(opp(word1))) + list(word2), model.vacuum)
    else:
        raise ValueError(f"unknown side {side!r}")
    if res.trusted_below <= 0:
        raise TruncationError("vacuum component depends on discarded content")
    if side == "left":
        return pair(tower, res.vector, model.vacuum, [0])
    return pair(tower, model.vacuum, res.vector, [0])

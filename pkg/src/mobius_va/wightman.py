"""Smeared fields, the Moebius representation and the Wightman-side checks.

``smear(v, f) = sum_n f^(n) v_n`` on the truncation; ``U(gamma)`` is the
exponential of ``pi(log gamma) = c_{-1} L_{-1} + c_0 L_0 + c_1 L_1``.  The
reconstruction direction reads off conformal dimensions, states and the
``sl2`` action from the smeared modes alone.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .circle import (
    LieElement,
    MoebiusElement,
    TestFunction,
    beta_action,
    log_moebius,
    raised_cosine_bump,
    sample,
)
from .errors import DegenerateFieldError, FitError, TruncationError
from .graded import (
    BlockOperator,
    Covector,
    GradedSpace,
    GradedVector,
    apply,
    exact_inverse,
    exact_rank,
)
from .vertex import Field, Model, ModeTower

__all__ = [
    "SmearedField",
    "smear",
    "multiply",
    "MoebiusRep",
    "u_of_gamma",
    "WordVector",
    "apply_word",
    "CheckResult",
    "covariance_check",
    "group_law_check",
    "vacuum_invariance_check",
    "WorkingTruncation",
    "working_truncation",
    "default_pad",
    "pi_operator",
    "infinitesimal_covariance_check",
    "Reconstruction",
    "reconstruct_model",
    "RoundTripReport",
    "roundtrip_check",
    "correlator",
    "correlators_to_csv",
    "RankReport",
    "reeh_schlieder_rank",
    "bump_dictionary",
    "OrderEstimate",
    "order_estimate",
    "spectrum_check",
    "vacuum_cyclicity_check",
    "smeared_locality_leakage",
]


# ---------------------------------------------------------------------------
# smearing


@dataclass(frozen=True)
class SmearedField:
    field: Field
    function: TestFunction
    operator: BlockOperator

    @property
    def lowering(self) -> int:
        """Largest weight decrease any term can cause."""
        return max((n for n in self.function.coeffs if n > 0), default=0)


def smear(v: Field, f: TestFunction) -> SmearedField:
    """``sum_n f^(n) v_n``.  Exact when ``f`` has exact coefficients.

    Modes ``n < -N`` push everything above the cutoff; they add no blocks but
    mark every source weight as tail.
    """
    space = v.state.space
    N = space.max_weight
    op = BlockOperator.zero(space, exact=f.is_exact)
    clipped = False
    for n, c in f.coeffs.items():
        if n > N:
            continue  # lands below weight 0
        if n < -N:
            clipped = True
            continue
        op = op + v.mode(n).scale(c)
    if clipped:
        op = BlockOperator(space, op.blocks, op.exact, range(N + 1))
    return SmearedField(v, f, op)


def multiply(f: TestFunction, g: TestFunction) -> TestFunction:
    """Pointwise product (coefficient convolution)."""
    out: dict[int, complex] = {}
    for n, a in f.coeffs.items():
        for m, b in g.coeffs.items():
            out[n + m] = out.get(n + m, 0) + a * b
    return TestFunction(out, f.band + g.band)


# ---------------------------------------------------------------------------
# the Moebius representation


def pi_operator(model: Model, X: LieElement) -> BlockOperator:
    op = BlockOperator.zero(model.space, exact=False)
    for m in (-1, 0, 1):
        c = complex(X.coeffs[m])
        if c != 0:
            op = op + model.L[m].scale(c)
    return op


class WorkingTruncation:
    """Sparse float copy of a model on weights ``<= N + pad``.

    ``U(gamma) v`` for ``v`` of weight ``s`` has components at every weight, and
    a product like ``U A U^-1`` sums over all intermediate weights.  Computing
    in a larger truncation and reading off weights ``<= N`` keeps that sum
    accurate on the trusted window.  Padding needs the model's mode algebra;
    simple quotients are handled in the universal algebra and projected.
    """

    def __init__(self, model: Model, pad: int = 0):
        self.model = model
        self.pad = pad
        self.quotient = model.__dict__.get("_quotient")
        if pad and model.algebra is None:
            raise ValueError("padding needs a model with a mode algebra")
        self.from_algebra = model.algebra is not None and (pad > 0 or self.quotient is not None)
        if self.from_algebra:
            alg = model.algebra
            self.N = model.N + pad
            self.basis = [alg.monomials(w) for w in range(self.N + 1)]
            dims = [len(b) for b in self.basis]
        else:
            self.N = model.N
            dims = list(model.dims)
        self.offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
        self.dims = dims
        self.dim = int(self.offsets[-1])
        if self.from_algebra:
            self.index = [
                {m: int(self.offsets[w]) + i for i, m in enumerate(monos)} for w, monos in enumerate(self.basis)
            ]
        self._modes: dict[tuple[int, int], "scipy.sparse.csr_matrix"] = {}
        self._L: dict[int, "scipy.sparse.csr_matrix"] = {}
        self._embed = None

    # operators ------------------------------------------------------------
    def _from_images(self, images: Callable, shift: int):
        import scipy.sparse as sp

        rows, cols, vals = [], [], []
        for s, monos in enumerate(self.basis):
            t = s - shift
            if t < 0 or t > self.N:
                continue
            for j, mono in enumerate(monos):
                for m2, c in images(mono):
                    rows.append(self.index[t][m2])
                    cols.append(int(self.offsets[s]) + j)
                    vals.append(float(c))
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim), dtype=complex)

    def mode(self, g: int, n: int):
        key = (g, n)
        if key not in self._modes:
            if self.from_algebra:
                alg = self.model.algebra
                self._modes[key] = self._from_images(lambda mono: alg._apply((g, n), mono), n)
            else:
                self._modes[key] = self.model.generators[g].mode(n).to_sparse()
        return self._modes[key]

    def L(self, m: int):
        if m not in self._L:
            if self.from_algebra:
                from .vertex import derivation_images

                image = derivation_images(self.model.algebra, m)
                self._L[m] = self._from_images(lambda mono: image(mono).items(), m)
            else:
                self._L[m] = self.model.L[m].to_sparse()
        return self._L[m]

    def pi(self, X: LieElement):
        import scipy.sparse as sp

        out = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for m in (-1, 0, 1):
            c = complex(X.coeffs[m])
            if c != 0:
                out = out + c * self.L(m)
        return out

    def smear(self, g: int, f: TestFunction):
        import scipy.sparse as sp

        out = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for n, c in f.coeffs.items():
            if abs(n) <= self.N:
                out = out + complex(c) * self.mode(g, n)
        return out

    def gram_blocks(self, normalization=1) -> list[np.ndarray]:
        """Float Gram matrices of the invariant bilinear form, weight by weight.

        Same recursion as the exact construction: ``(g_n w, u) = (-1)^d (w, g_{-n} u)``.
        """
        if not self.from_algebra:
            from .forms import build_invariant_form

            return [to_float_array(G) for G in build_invariant_form(self.model, normalization=normalization).matrices]
        alg = self.model.algebra
        blocks = [np.array([[complex(normalization)]])]
        for w in range(1, self.N + 1):
            G = np.zeros((self.dims[w], self.dims[w]), dtype=complex)
            sl_w = slice(self.offsets[w], self.offsets[w + 1])
            for i, mono in enumerate(self.basis[w]):
                (g, n), rest = mono[0], mono[1:]
                lw = w + n
                sign = -1 if alg.dims[g] % 2 else 1
                r = self.index[lw][rest] - self.offsets[lw]
                M = self.mode(g, -n)[self.offsets[lw]:self.offsets[lw + 1], sl_w]
                G[i, :] = sign * (M.T @ blocks[lw][r, :])
            blocks.append(G)
        return blocks

    # coordinates ------------------------------------------------------------
    def embedding(self) -> np.ndarray:
        """Dense ``dim x model.total_dim`` map from model coordinates."""
        if self._embed is None:
            model = self.model
            E = np.zeros((self.dim, model.space.total_dim), dtype=complex)
            moff = model.space.offsets()
            for w in range(model.N + 1):
                d = model.dims[w]
                if not d:
                    continue
                block = np.eye(d) if self.quotient is None or not self.from_algebra else to_float_array(self.quotient[1][w])
                E[self.offsets[w]:self.offsets[w] + block.shape[0], moff[w]:moff[w] + d] = block
            self._embed = E
        return self._embed

    def restrict(self, Y: np.ndarray) -> np.ndarray:
        """Model coordinates (weights ``<= N``) of work-space columns."""
        model = self.model
        moff = model.space.offsets()
        out = np.zeros((model.space.total_dim,) + Y.shape[1:], dtype=complex)
        for w in range(model.N + 1):
            d = model.dims[w]
            if not d:
                continue
            rows = Y[self.offsets[w]:self.offsets[w + 1]]
            if self.quotient is not None and self.from_algebra:
                rows = to_float_array(self.quotient[0][w]) @ rows
            out[moff[w]:moff[w] + d] = rows
        return out


def to_float_array(arr: np.ndarray) -> np.ndarray:
    from .graded import to_complex

    return to_complex(arr)


def working_truncation(model: Model, pad: int) -> WorkingTruncation:
    store = model.__dict__.setdefault("_working", {})
    if pad not in store:
        store[pad] = WorkingTruncation(model, pad)
    return store[pad]


def default_pad(gamma: MoebiusElement, tol: float = 1e-9, max_pad: int = 16) -> int:
    """Extra weights for the working truncation.

    Contributions from above the working cutoff decay roughly like
    ``rho^(2 pad)`` with ``rho = |b| / |a|``; the constant in front was
    measured on the Heisenberg model (about ``1e5`` at ``N = 12``).
    """
    rho = gamma.decay_ratio()
    if rho < 1e-14:
        return 0
    pad = math.ceil(math.log(tol * 1e-5) / (2 * math.log(rho)))
    return max(0, min(pad, max_pad))


@dataclass
class MoebiusRep:
    """``U(gamma) = exp(pi(log gamma))`` realized on a working truncation."""

    gamma: MoebiusElement
    generator: LieElement
    work: WorkingTruncation
    rotation: bool

    @property
    def margin(self) -> int:
        return self.work.model.margin

    @property
    def pad(self) -> int:
        return self.work.pad

    def apply_work(self, Y: np.ndarray, inverse: bool = False) -> np.ndarray:
        """``U Y`` (or ``U^-1 Y``) for work-space columns ``Y``."""
        from scipy.sparse.linalg import expm_multiply

        sign = -1 if inverse else 1
        if self.rotation:
            c0 = complex(self.generator.coeffs[0])
            weights = np.repeat(np.arange(self.work.N + 1), self.work.dims)
            phase = np.exp(sign * c0 * weights)
            return phase.reshape((-1,) + (1,) * (Y.ndim - 1)) * Y
        P = self.work.pi(self.generator)
        return expm_multiply(P * sign, Y)

    @property
    def operator(self) -> BlockOperator:
        """Blocks of ``U(gamma)`` between weights ``<= N``."""
        cached = self.__dict__.get("_operator")
        if cached is None:
            E = self.work.embedding()
            dense = self.work.restrict(self.apply_work(E))
            cached = BlockOperator.from_dense(self.work.model.space, dense)
            self._operator = cached
        return cached

    def dense(self) -> np.ndarray:
        return self.operator.to_dense()


def u_of_gamma(model: Model, gamma: MoebiusElement, pad: int | None = None) -> MoebiusRep:
    """``exp(pi(log gamma))`` on the truncation.

    A pure rotation is diagonal, ``e^{i n phi}`` on ``V(n)``, and is built in
    closed form.  Otherwise ``pi(log gamma)`` is exponentiated on a working
    truncation ``N + pad`` (``pad`` from :func:`default_pad` unless given)
    and read off on weights ``<= N``.
    """
    X = log_moebius(gamma)
    rotation = X.coeffs[-1] == 0 and X.coeffs[1] == 0
    if rotation:
        pad = 0
    elif pad is None:
        pad = default_pad(gamma) if model.algebra is not None else 0
    return MoebiusRep(gamma, X, working_truncation(model, pad), rotation)


# ---------------------------------------------------------------------------
# words of smeared fields


@dataclass
class WordVector:
    """Result of applying a smeared word to a vector.

    Components at weights ``>= trusted_below`` may be missing contributions
    that were discarded above the cutoff and later lowered back.
    """

    vector: GradedVector
    trusted_below: int
    discarded: bool


def apply_word(
    model: Model,
    word: Sequence[tuple[Field, TestFunction]],
    vec: GradedVector,
) -> WordVector:
    """``phi_1(f_1) ... phi_k(f_k) vec`` (rightmost factor acts first)."""
    N = model.N
    lost = 0 if vec.tail else math.inf  # lowest weight that may miss content
    for fld, f in reversed(list(word)):
        sm = smear(fld, f)
        vec = apply(sm.operator, GradedVector(vec.space, vec.components, vec.exact, False))
        lost -= sm.lowering
        if vec.tail:
            lost = min(lost, N + 1)
    discarded = lost != math.inf
    trusted = N + 1 if not discarded else int(min(max(lost, 0), N + 1))
    vec = GradedVector(vec.space, vec.components, vec.exact, discarded)
    return WordVector(vec, trusted, discarded)


# ---------------------------------------------------------------------------
# reports


@dataclass
class CheckResult:
    check: str
    model: str
    params: dict
    max_deviation: float
    window: list[int]
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "model": self.model,
            "params": {k: str(v) for k, v in self.params.items()},
            "max_deviation": self.max_deviation,
            "window": list(self.window),
            "pass": self.passed,
        }


def _window_indices(model: Model, window: Iterable[int]) -> np.ndarray:
    off = model.space.offsets()
    return np.array([off[w] + i for w in window for i in range(model.dims[w])], dtype=int)


def _window_columns(work: WorkingTruncation, window: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
    """Work-space columns of the window basis and their model indices."""
    idx = _window_indices(work.model, window)
    return work.embedding()[:, idx], idx


def covariance_check(
    model: Model,
    v: Field,
    gamma: MoebiusElement,
    f: TestFunction,
    tol: float = 1e-6,
    band_out: int | None = None,
    pad: int | None = None,
) -> CheckResult:
    """Max deviation of ``U(g) v(f) U(g)^-1`` from ``v(beta_d(g) f)`` on the window.

    Both sides are applied to the window basis; output components on window
    weights are compared. The transformed test function may drop a Fourier
    tail beyond ``band_out`` of L2 mass up to ``tol / 100``.
    """
    rep = u_of_gamma(model, gamma, pad)
    work = rep.work
    g = model.generators.index(v) if v in model.generators else None
    window = model.window()
    W, idx = _window_columns(work, window)
    tail_tol = min(tol * 1e-2, 1e-8)
    bf = beta_action(v.dim, gamma, f, band_out, tol=tail_tol)
    if g is not None:
        A = work.smear(g, f)
        B = work.smear(g, bf)
        lhs = rep.apply_work(A @ rep.apply_work(W, inverse=True))
        rhs = B @ W
        lhs, rhs = work.restrict(lhs)[idx], work.restrict(rhs)[idx]
    else:
        if rep.pad:
            raise ValueError("padding is available for generator fields only")
        U = rep.operator.to_float().to_dense()
        Uinv = u_of_gamma(model, gamma.inverse(), 0).operator.to_float().to_dense()
        A = smear(v, f).operator.to_float().to_dense()
        B = smear(v, bf).operator.to_float().to_dense()
        lhs = (U @ A @ Uinv)[np.ix_(idx, idx)]
        rhs = B[np.ix_(idx, idx)]
    dev = float(np.max(np.abs(lhs - rhs))) if idx.size else 0.0
    return CheckResult("covariance", model.name, model.params, dev, window, dev < tol,
                       {"pad": rep.pad, "band_out": bf.band, "tail_tol": tail_tol})


def group_law_check(
    model: Model, g1: MoebiusElement, g2: MoebiusElement, tol: float = 1e-8, pad: int | None = None
) -> CheckResult:
    """``U(g1) U(g2) = U(g1 g2)`` on the window basis."""
    if pad is None:
        pad = max(default_pad(g1), default_pad(g2), default_pad(g1 @ g2)) if model.algebra is not None else 0
    r1, r2, r12 = (u_of_gamma(model, g, pad) for g in (g1, g2, g1 @ g2))
    work = working_truncation(model, pad)
    for r in (r1, r2, r12):
        r.work = work
    W, idx = _window_columns(work, model.window())
    lhs = work.restrict(r1.apply_work(r2.apply_work(W)))[idx]
    rhs = work.restrict(r12.apply_work(W))[idx]
    dev = float(np.max(np.abs(lhs - rhs))) if idx.size else 0.0
    return CheckResult("group_law", model.name, model.params, dev, model.window(), dev < tol, {"pad": pad})


def vacuum_invariance_check(model: Model, gamma: MoebiusElement, tol: float = 1e-10) -> CheckResult:
    """``U(gamma) Omega = Omega``."""
    rep = u_of_gamma(model, gamma)
    omega = rep.work.embedding()[:, [0]]
    out = rep.work.restrict(rep.apply_work(omega))[:, 0]
    target = np.zeros_like(out)
    target[0] = 1
    dev = float(np.max(np.abs(out - target)))
    return CheckResult("vacuum_invariance", model.name, model.params, dev, model.window(), dev < tol)


def infinitesimal_covariance_check(model: Model, v: Field, X: LieElement, f: TestFunction) -> CheckResult:
    """``[pi(g d/dtheta), v(f)] = v((d-1) g' f - g f')`` on the window.

    For exact ``f`` the identity is checked exactly for each ``L_m`` occurring
    in ``X`` (where it reads ``[L_m, v(f)] = v(sum_n f^(n) ((d-1)m - n) e_{m+n})``)
    and the combination follows by linearity; otherwise in floats.
    """
    window = model.window()
    d = v.dim
    if f.is_exact:
        exact_ok, dev = True, 0.0
        for m in (-1, 0, 1):
            if X.coeffs[m] == 0:
                continue
            h = TestFunction(
                {n + m: c * ((d - 1) * m - n) for n, c in f.coeffs.items()}, f.band + 1
            )
            lhs = model.L[m].commutator(smear(v, f).operator)
            rhs = smear(v, h).operator
            srcs = [s for s in window if s not in lhs.tail and s not in rhs.tail]
            if not lhs.equals(rhs, srcs, window):
                exact_ok = False
                dev = max(dev, lhs.max_deviation(rhs, srcs, window))
        return CheckResult("infinitesimal_covariance", model.name, model.params, dev, window, exact_ok,
                           {"exact": True})
    g = X.vector_field()
    h = multiply(g.derivative(), f).scale(d - 1) - multiply(g, f.derivative())
    lhs = pi_operator(model, X).commutator(smear(v, f).operator)
    rhs = smear(v, h).operator
    srcs = [s for s in window if s not in lhs.tail and s not in rhs.tail]
    dev = lhs.max_deviation(rhs, srcs, window)
    return CheckResult("infinitesimal_covariance", model.name, model.params, dev, window, dev < 1e-10,
                       {"exact": False})


# ---------------------------------------------------------------------------
# reconstruction from smeared modes


SmearedAccess = Callable[[TestFunction], BlockOperator]


@dataclass
class Reconstruction:
    """Vertex algebra data recovered from smeared fields."""

    model: Model
    dims: dict[str, int]
    states: dict[str, GradedVector]
    monomials: list[list[tuple[tuple[int, int], ...]]]


def _is_zero_vec(v: GradedVector, tol: float) -> bool:
    if v.exact:
        return v.is_zero()
    return all(np.max(np.abs(c), initial=0.0) <= tol for c in v.components)


def reconstruct_model(
    space: GradedSpace,
    vacuum: GradedVector,
    fields: Mapping[str, SmearedAccess],
    name: str = "reconstructed",
    margin: int = 3,
    tol: float = 1e-10,
) -> Reconstruction:
    """Rebuild a truncated Moebius vertex algebra from ``phi -> phi(e_n)``.

    * ``d = min{n >= 0 : phi(e_{-n}) Omega != 0}`` and ``v = phi(e_{-d}) Omega``;
    * a basis of each ``V(w)`` is chosen greedily among creation words
      ``phi_{n_1} ... phi_{n_k} Omega`` (``n_i <= -d_i``);
    * ``L_m`` (``m = -1, 0, 1``) is defined on those words by ``L_m Omega = 0``
      and ``[L_m, phi_n] = ((d-1)m - n) phi_{m+n}``.
    """
    N = space.max_weight
    names = list(fields)
    modes: dict[str, ModeTower] = {}
    dims: dict[str, int] = {}
    states: dict[str, GradedVector] = {}
    for nm in names:
        access = fields[nm]
        tower = ModeTower(0, lambda n, a=access: a(TestFunction.e(n, abs(n))))
        d = None
        for k in range(N + 1):
            out = apply(tower[-k], vacuum)
            if not _is_zero_vec(out, tol):
                d = k
                break
        if d is None:
            raise DegenerateFieldError(f"field {nm!r}: phi(e_-n) Omega vanishes for all n <= {N}")
        tower.dim = d
        dims[nm] = d
        states[nm] = apply(tower[-d], vacuum)
        modes[nm] = tower

    exact = vacuum.exact and all(t[-dims[nm]].exact for nm, t in modes.items())
    gens = [Field(nm, states[nm], dims[nm], modes[nm], quasiprimary=None) for nm in names]

    # greedy basis of creation words, non-increasing keys
    def words(w: int):
        out = []

        def rec(rem: int, max_key, acc):
            if rem == 0:
                out.append(tuple(acc))
                return
            for g, nm in enumerate(names):
                d = dims[nm]
                for k in range(max(d, 1), rem + 1):
                    key = (-k, g)
                    if max_key is not None and key > max_key:
                        continue
                    rec(rem - k, key, acc + [(g, -k)])

        rec(w, None, [])
        return sorted(out)

    def word_vec(word) -> GradedVector:
        vec = vacuum
        for g, n in reversed(word):
            vec = apply(gens[g].mode(n), vec)
        return vec

    basis_words: list[list[tuple]] = []
    change: list[np.ndarray] = []  # columns: coordinates of chosen words
    for w in range(N + 1):
        dim_w = space.dims[w]
        chosen, cols = [], []
        if w == 0:
            chosen, cols = [()], [vacuum.components[0]]
        else:
            for wd in words(w):
                if len(chosen) == dim_w:
                    break
                col = word_vec(wd).components[w]
                trial = np.column_stack(cols + [col]) if cols else col.reshape(-1, 1)
                if _rank(trial, exact, tol) > len(cols):
                    chosen.append(wd)
                    cols.append(col)
        if len(chosen) != dim_w:
            raise DegenerateFieldError(f"fields do not generate V({w}) from the vacuum")
        basis_words.append(chosen)
        change.append(np.column_stack(cols) if cols else np.zeros((0, 0), dtype=object if exact else complex))

    inv = [exact_inverse(C) if exact else (np.linalg.inv(C) if C.size else C) for C in change]

    L = {}
    for m in (-1, 0, 1):
        blocks, tail = {}, set()
        for s in range(N + 1):
            t = s - m
            if t < 0 or not space.dims[s]:
                continue
            if t > N:
                tail.add(s)
                continue
            cols = []
            for wd in basis_words[s]:
                acc = GradedVector.zero(space, exact)
                for i, (g, n) in enumerate(wd):
                    coef = (dims[names[g]] - 1) * m - n
                    if coef == 0:
                        continue
                    acc = acc + word_vec(wd[:i] + ((g, m + n),) + wd[i + 1:]).scale(coef)
                cols.append(acc.components[t])
            if not space.dims[t]:
                continue
            img = np.column_stack(cols)
            blocks[(t, s)] = img @ inv[s]
        L[m] = BlockOperator(space, blocks, exact, tail)

    for g in gens:
        g.quasiprimary = apply(L[1], g.state).is_zero() if exact else None
    model = Model(name, {}, space, vacuum, L, gens, margin, None, [], [list(map(str, b)) for b in basis_words])
    return Reconstruction(model, dims, states, basis_words)


def _rank(mat: np.ndarray, exact: bool, tol: float) -> int:
    if exact:
        return exact_rank(mat)
    return int(np.linalg.matrix_rank(np.asarray(mat, complex), tol=tol))


@dataclass
class RoundTripReport:
    dims_match: bool
    states_match: bool
    vacuum_match: bool
    L_match: bool
    towers_match: bool
    reconstructed_dims: dict[str, int]
    max_deviation: float

    @property
    def passed(self) -> bool:
        return self.dims_match and self.states_match and self.vacuum_match and self.L_match and self.towers_match


def roundtrip_check(model: Model) -> RoundTripReport:
    """Smear the model's generators, reconstruct, and compare with the original.

    Everything is compared exactly; the identity map is the isomorphism, so
    vacuum, ``L_m`` and every generator mode must coincide.
    """
    access = {g.name: (lambda f, g=g: smear(g, f).operator) for g in model.generators}
    rec = reconstruct_model(model.space, model.vacuum, access, model.name, model.margin)
    N = model.N
    dims_match = all(rec.dims[g.name] == g.dim for g in model.generators)
    states_match = all(rec.states[g.name].equals(g.state) for g in model.generators)
    vacuum_match = rec.model.vacuum.equals(model.vacuum)
    L_match = True
    dev = 0.0
    for m in (-1, 0, 1):
        srcs = [s for s in range(N + 1) if s not in model.L[m].tail]
        if not rec.model.L[m].equals(model.L[m], srcs):
            L_match = False
            dev = max(dev, rec.model.L[m].max_deviation(model.L[m], srcs))
    towers_match = True
    for g, h in zip(model.generators, rec.model.generators):
        for n in range(-N, N + 1):
            if not h.mode(n).equals(g.mode(n)):
                towers_match = False
                dev = max(dev, h.mode(n).max_deviation(g.mode(n)))
    return RoundTripReport(dims_match, states_match, vacuum_match, L_match, towers_match, rec.dims, dev)


# ---------------------------------------------------------------------------
# correlators


def correlator(
    model: Model,
    word: Sequence[tuple[Field, TestFunction]],
    covector: Covector | None = None,
):
    """``lambda(phi_1(f_1) ... phi_k(f_k) Omega)``; ``lambda`` defaults to the dual of ``Omega``."""
    if covector is None:
        covector = Covector.dual_basis(model.space, 0, 0)
    res = apply_word(model, word, model.vacuum)
    if covector.weight >= res.trusted_below:
        raise TruncationError(
            f"weight {covector.weight} is not trusted after the word (trusted below {res.trusted_below})",
            index=covector.weight,
        )
    return covector(res.vector)


def correlators_to_csv(rows: Iterable[tuple[Sequence[tuple[Field, TestFunction]], complex]]) -> str:
    """CSV text with columns ``k, fields, functions, re, im``."""
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["k", "fields", "functions", "re", "im"])
    for word, value in rows:
        value = complex(value)
        names = ";".join(f.name for f, _ in word)
        funcs = ";".join(
            " ".join(f"{n}:{complex(c).real:+.17g}{complex(c).imag:+.17g}j" for n, c in tf.coeffs.items()) for _, tf in word
        )
        out.writerow([len(word), names, funcs, repr(value.real), repr(value.imag)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Reeh-Schlieder rank experiment


def bump_dictionary(interval: tuple[float, float], band: int, centers: int = 8, widths: int = 2) -> list[TestFunction]:
    """Raised-cosine bumps supported inside ``interval``, projected to ``band``."""
    a, b = interval
    length = b - a
    if length <= 0:
        raise ValueError("empty interval")
    out = []
    for k in range(1, widths + 1):
        half = length * k / (4 * widths)
        lo, hi = a + half, b - half
        for c in np.linspace(lo, hi, centers):
            out.append(sample(raised_cosine_bump(float(c), half), band))
    return out


@dataclass
class RankReport:
    rank: int
    full_dim: int
    sigma_ratio: float
    words: int
    singular_values: np.ndarray

    @property
    def passed(self) -> bool:
        return self.rank == self.full_dim and self.sigma_ratio > 1e-8


def reeh_schlieder_rank(
    model: Model,
    interval: tuple[float, float],
    band: int,
    max_length: int,
    weight_cutoff: int,
    rel_tol: float = 1e-8,
) -> RankReport:
    """Numerical rank of ``{phi_1(f_1)...phi_k(f_k) Omega : k <= K}`` in ``V(0)+...+V(N_w)``.

    Intermediate vectors reach weights far above the model's cutoff (each
    factor can raise by ``band``), so the words are expanded in modes and
    evaluated with the model's mode algebra, which has no truncation.  The
    result is projected onto weights ``<= N_w`` in the model's monomial basis.
    """
    alg = model.algebra
    if alg is None or model.params.get("simple"):
        raise ValueError("the rank experiment needs a universal model with its mode algebra")
    if weight_cutoff > model.N - model.margin:
        raise ValueError("weight cutoff must lie in the trusted window")
    basis = [alg.monomials(w) for w in range(weight_cutoff + 1)]
    offsets = np.cumsum([0] + [len(b) for b in basis])
    index = {m: offsets[w] + i for w, monos in enumerate(basis) for i, m in enumerate(monos)}
    D = int(offsets[-1])
    dictionary = bump_dictionary(interval, band)
    R = 2 * band + 1
    F = np.array([[complex(f.coefficient(n)) for n in range(-band, band + 1)] for f in dictionary])
    gens = range(len(model.generators))

    memo: dict[tuple, dict] = {(): {(): Fraction(1)}}

    def vec(word: tuple) -> dict:
        if word not in memo:
            memo[word] = alg.apply_mode(word[0], vec(word[1:]))
        return memo[word]

    columns = [np.eye(D, 1, dtype=complex)[:, 0]]
    for k in range(1, max_length + 1):
        for gword in np.ndindex(*([len(gens)] * k)):
            T = np.zeros((R,) * k + (D,), dtype=complex)
            for modes in _mode_tuples(k, band, weight_cutoff):
                ns = tuple(n + band for n in modes)
                for mono, c in vec(tuple(zip(gword, modes))).items():
                    T[ns + (index[mono],)] += float(c)
            columns.extend(_contract_columns(T, F, k))
    M = np.array(columns).T
    norms = np.linalg.norm(M, axis=0)
    M = M[:, norms > 0] / norms[norms > 0]
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > rel_tol * sv[0])) if sv.size else 0
    ratio = float(sv[D - 1] / sv[0]) if sv.size >= D and sv[0] > 0 else 0.0
    return RankReport(rank, D, ratio, M.shape[1], sv)


def _mode_tuples(k: int, band: int, cutoff: int) -> list[tuple[int, ...]]:
    """Mode tuples whose partial weights (from the right) stay in range."""
    out = []

    def rec(rev: list[int], acc: int):
        left = k - len(rev)
        if left == 0:
            if acc <= cutoff:
                out.append(tuple(reversed(rev)))
            return
        for n in range(-band, band + 1):
            w = acc - n
            if w < 0 or w - band * (left - 1) > cutoff:
                continue
            rec(rev + [n], w)

    rec([], 0)
    return out


def _contract_columns(T: np.ndarray, F: np.ndarray, k: int) -> list[np.ndarray]:
    """Columns ``sum F[a_1,n_1]...F[a_k,n_k] T[n_1..n_k, :]`` over all ``(a_1..a_k)``."""
    res = T
    for slot in range(k):
        # contract the first remaining mode axis (at position ``slot``) with F
        res = np.tensordot(F, res, axes=([1], [slot]))
        res = np.moveaxis(res, 0, slot)
    return list(res.reshape(-1, res.shape[-1]))


# ---------------------------------------------------------------------------
# polynomial-bound diagnostic


@dataclass
class OrderEstimate:
    degree: float
    max_residual: float
    points: int
    degenerate: bool


def order_estimate(
    model: Model,
    fields: Sequence[Field],
    probe: GradedVector,
    covector: Covector,
    mode_range: Iterable[int],
) -> OrderEstimate:
    """Fit ``log|<u', v^1_{m_1}...v^k_{m_k} u>|`` against ``log(1 + max|m_i|)``.

    A single nonzero point (or a single abscissa) gives degree 0 and sets
    ``degenerate``.  Only truncation-free pairings are used.
    """
    rng = list(mode_range)
    xs, ys = [], []
    for ms in np.ndindex(*([len(rng)] * len(fields))):
        modes = [rng[i] for i in ms]
        vec = GradedVector(probe.space, probe.components, probe.exact, False)
        for f, m in reversed(list(zip(fields, modes))):
            vec = apply(f.mode(m), vec)
        if vec.tail:
            continue
        val = abs(complex(covector(vec)))
        if val > 0:
            xs.append(math.log1p(max(abs(m) for m in modes)))
            ys.append(math.log(val))
    if not xs:
        raise FitError("all pairings vanish; no degree can be fitted")
    if len(set(xs)) < 2:
        return OrderEstimate(0.0, float(max(ys) - min(ys)), len(xs), True)
    A = np.column_stack([np.ones(len(xs)), xs])
    coef, *_ = np.linalg.lstsq(A, np.array(ys), rcond=None)
    resid = np.abs(A @ coef - np.array(ys))
    return OrderEstimate(float(coef[1]), float(resid.max()), len(xs), False)


# ---------------------------------------------------------------------------
# spectrum, cyclicity, smeared locality


def spectrum_check(model: Model) -> CheckResult:
    """``L_0`` acts on ``V(n)`` as ``n`` and has no other blocks; spectrum within ``{0..N}``."""
    L0 = model.L[0]
    ok = set(L0.blocks) <= {(n, n) for n in range(model.N + 1)}
    for n in range(model.N + 1):
        blk = L0.block(n, n)
        ok &= all(blk[i, j] == (n if i == j else 0) for i in range(blk.shape[0]) for j in range(blk.shape[1]))
    spectrum = sorted(n for n, d in enumerate(model.dims) if d)
    return CheckResult("spectrum", model.name, model.params, 0.0 if ok else 1.0, list(range(model.N + 1)), ok,
                       {"spectrum": spectrum})


def vacuum_cyclicity_check(model: Model) -> CheckResult:
    """Creation-mode monomials applied to the vacuum span every ``V(n)``, exact rank."""
    ranks = []
    for w in range(model.N + 1):
        cols = []
        for mono in model.algebra.monomials(w) if w else [()]:
            vec = model.vacuum
            for g, n in reversed(mono):
                vec = apply(model.generators[g].mode(n), vec)
            cols.append(vec.components[w])
        mat = np.column_stack(cols) if cols and model.dims[w] else np.zeros((model.dims[w], 0), dtype=object)
        ranks.append(exact_rank(mat) if mat.size else 0)
    ok = ranks == list(model.dims)
    return CheckResult("vacuum_cyclicity", model.name, model.params, 0.0 if ok else 1.0, list(range(model.N + 1)), ok,
                       {"ranks": ranks})


def smeared_locality_leakage(
    model: Model,
    u: Field,
    v: Field,
    f: TestFunction,
    g: TestFunction,
) -> float:
    """Largest column norm of ``[u(f), v(g)]`` on window sources, window targets.

    For band-limited projections of functions with disjoint supports this is
    small but not zero; it is a diagnostic, not an assertion.
    """
    A = smear(u, f).operator.to_float()
    B = smear(v, g).operator.to_float()
    C = A.commutator(B).to_dense()
    idx = _window_indices(model, model.window())
    sub = C[np.ix_(idx, idx)]
    return float(np.max(np.linalg.norm(sub, axis=0))) if sub.size else 0.0

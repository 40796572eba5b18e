"""Truncated graded spaces and weight-block operators.

A :class:`GradedSpace` is ``V(0) + V(1) + ... + V(N)``.  Operators are stored
as dictionaries of blocks keyed by ``(target_weight, source_weight)``.  Two
scalar kinds are supported: exact rationals (``fractions.Fraction`` in object
arrays) and complex floats.  Exact data promotes one way to floats.

Anything an operator would send above weight ``N`` is dropped; the source
weights where that happened are remembered in ``BlockOperator.tail`` so that
identities can be asserted only where the truncation is harmless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "GradedSpace",
    "GradedVector",
    "BlockOperator",
    "Covector",
    "StructureError",
    "project_weight",
    "apply",
    "exact_array",
    "to_fraction",
    "is_exact_scalar",
    "exact_rank",
    "exact_nullspace",
    "exact_rref",
    "exact_det",
    "exact_inverse",
    "to_complex",
]


class StructureError(ValueError):
    """Raised on block-shape or scalar-kind mismatches."""


def is_exact_scalar(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact scalar: {x!r}")


def exact_array(rows: Sequence[Sequence] | np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Object array of Fractions."""
    if shape is not None and (shape[0] == 0 or shape[1] == 0):
        return np.zeros(shape, dtype=object)
    arr = np.array(rows, dtype=object)
    flat = arr.reshape(-1)
    for i, x in enumerate(flat):
        flat[i] = to_fraction(x)
    return flat.reshape(arr.shape)


def _zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape, dtype=complex)


def to_complex(arr: np.ndarray) -> np.ndarray:
    """Complex copy of an array; object arrays are converted entry by entry on their support."""
    arr = np.asarray(arr)
    if arr.dtype != object:
        return arr.astype(complex)
    out = np.zeros(arr.shape, dtype=complex)
    idx = np.flatnonzero(arr)
    if idx.size:
        out.flat[idx] = [complex(x) for x in arr.flat[idx]]
    return out


def _as_kind(arr: np.ndarray, exact: bool) -> np.ndarray:
    if exact:
        if arr.dtype != object:
            raise StructureError("cannot demote float data to exact scalars")
        return arr
    if arr.dtype == object:
        return to_complex(arr)
    return arr.astype(complex, copy=False)


def _is_zero(arr: np.ndarray) -> bool:
    if arr.size == 0:
        return True
    if arr.dtype == object:
        return all(x == 0 for x in arr.flat)
    return not np.any(arr)


@dataclass(frozen=True, eq=False)
class GradedSpace:
    """Dimensions of ``V(n)`` for ``0 <= n <= max_weight`` plus basis labels.

    Spaces compare by identity: operators of different models never mix.
    """

    dims: tuple[int, ...]
    labels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        if len(self.dims) == 0 or self.dims[0] < 1:
            raise StructureError("V(0) must contain the vacuum")
        if self.labels is not None:
            if len(self.labels) != len(self.dims):
                raise StructureError("one label tuple per weight required")
            for n, (d, lab) in enumerate(zip(self.dims, self.labels)):
                if len(lab) != d:
                    raise StructureError(f"weight {n}: {len(lab)} labels for dim {d}")

    @property
    def max_weight(self) -> int:
        return len(self.dims) - 1

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for d in self.dims:
            out.append(acc)
            acc += d
        return out

    def window(self, margin: int) -> range:
        return range(0, max(self.max_weight - margin, -1) + 1)

    def check_weight(self, n: int) -> None:
        if not 0 <= n <= self.max_weight:
            raise IndexError(f"weight {n} outside 0..{self.max_weight}")


class GradedVector:
    """Element of the truncation, one component array per weight."""

    def __init__(self, space: GradedSpace, components: Sequence[np.ndarray], exact: bool, tail: bool = False):
        if len(components) != len(space.dims):
            raise StructureError("one component per weight required")
        comps = []
        for n, c in enumerate(components):
            c = _as_kind(np.asarray(c), exact)
            if c.shape != (space.dims[n],):
                raise StructureError(f"weight {n}: shape {c.shape}, expected ({space.dims[n]},)")
            comps.append(c)
        self.space = space
        self.components = tuple(comps)
        self.exact = exact
        self.tail = tail

    @classmethod
    def zero(cls, space: GradedSpace, exact: bool = True) -> "GradedVector":
        return cls(space, [_zeros((d,), exact) for d in space.dims], exact)

    @classmethod
    def basis(cls, space: GradedSpace, weight: int, index: int, exact: bool = True) -> "GradedVector":
        space.check_weight(weight)
        comps = [_zeros((d,), exact) for d in space.dims]
        comps[weight][index] = Fraction(1) if exact else 1.0
        return cls(space, comps, exact)

    @classmethod
    def from_component(cls, space: GradedSpace, weight: int, vec, exact: bool | None = None) -> "GradedVector":
        vec = np.asarray(vec)
        if exact is None:
            exact = vec.dtype == object
        comps = [_zeros((d,), exact) for d in space.dims]
        comps[weight] = vec
        return cls(space, comps, exact)

    def to_float(self) -> "GradedVector":
        if not self.exact:
            return self
        return GradedVector(self.space, [to_complex(c) for c in self.components], False, self.tail)

    def weights(self) -> list[int]:
        """Weights carrying a nonzero component."""
        return [n for n, c in enumerate(self.components) if not _is_zero(c)]

    def is_zero(self) -> bool:
        return not self.weights()

    def is_homogeneous(self) -> bool:
        return len(self.weights()) <= 1

    def flat(self, weights: Iterable[int] | None = None) -> np.ndarray:
        ws = range(len(self.components)) if weights is None else weights
        parts = [self.components[n] for n in ws]
        if not parts:
            return np.zeros(0, dtype=object if self.exact else complex)
        return np.concatenate(parts)

    def _combine(self, other: "GradedVector", sign: int) -> "GradedVector":
        if other.space != self.space:
            raise StructureError("vectors live in different spaces")
        exact = self.exact and other.exact
        a = self if exact else self.to_float()
        b = other if exact else other.to_float()
        comps = [x + sign * y for x, y in zip(a.components, b.components)]
        return GradedVector(self.space, comps, exact, self.tail or other.tail)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return GradedVector(self.space, [-c for c in self.components], self.exact, self.tail)

    def scale(self, c) -> "GradedVector":
        if self.exact and is_exact_scalar(c):
            c = to_fraction(c)
            return GradedVector(self.space, [c * x for x in self.components], True, self.tail)
        v = self.to_float()
        return GradedVector(self.space, [complex(c) * x for x in v.components], False, self.tail)

    __rmul__ = scale

    def equals(self, other: "GradedVector", weights: Iterable[int] | None = None) -> bool:
        """Exact comparison (float data compared with ==)."""
        ws = range(len(self.components)) if weights is None else weights
        for n in ws:
            a, b = self.components[n], other.components[n]
            if a.shape != b.shape or not all(x == y for x, y in zip(a.flat, b.flat)):
                return False
        return True

    def max_deviation(self, other: "GradedVector", weights: Iterable[int] | None = None) -> float:
        ws = list(range(len(self.components)) if weights is None else weights)
        a, b = self.to_float(), other.to_float()
        dev = 0.0
        for n in ws:
            if a.components[n].size:
                dev = max(dev, float(np.max(np.abs(a.components[n] - b.components[n]))))
        return dev

    def __repr__(self) -> str:
        kind = "exact" if self.exact else "float"
        return f"GradedVector({kind}, weights={self.weights()}, tail={self.tail})"


@dataclass(frozen=True)
class Covector:
    """Element of the restricted dual supported at a single weight."""

    weight: int
    row: np.ndarray

    def __call__(self, v: GradedVector):
        comp = v.components[self.weight]
        row = self.row
        if v.exact and row.dtype == object:
            return sum((x * y for x, y in zip(row, comp)), Fraction(0))
        return complex(np.dot(np.asarray(row, dtype=complex), np.asarray(comp, dtype=complex)))

    @classmethod
    def dual_basis(cls, space: GradedSpace, weight: int, index: int) -> "Covector":
        row = _zeros((space.dims[weight],), True)
        row[index] = Fraction(1)
        return cls(weight, row)


class BlockOperator:
    """Linear map of the truncation stored as weight blocks.

    ``blocks[(m, n)]`` is a ``dims[m] x dims[n]`` array mapping ``V(n)`` into
    ``V(m)``.  ``tail`` holds the source weights from which some output was
    discarded above the cutoff (or was computed from discarded data).
    """

    def __init__(
        self,
        space: GradedSpace,
        blocks: Mapping[tuple[int, int], np.ndarray] | None = None,
        exact: bool = True,
        tail: Iterable[int] = (),
    ):
        self.space = space
        self.exact = exact
        out = {}
        for (m, n), b in (blocks or {}).items():
            if not (0 <= m <= space.max_weight and 0 <= n <= space.max_weight):
                raise StructureError(f"block {(m, n)} outside the truncation")
            b = _as_kind(np.asarray(b), exact)
            if b.shape != (space.dims[m], space.dims[n]):
                raise StructureError(
                    f"block {(m, n)} has shape {b.shape}, expected {(space.dims[m], space.dims[n])}"
                )
            out[(m, n)] = b
        self.blocks: dict[tuple[int, int], np.ndarray] = out
        self.tail = frozenset(tail)

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, space: GradedSpace, exact: bool = True) -> "BlockOperator":
        return cls(space, {}, exact)

    @classmethod
    def identity(cls, space: GradedSpace, exact: bool = True) -> "BlockOperator":
        blocks = {}
        for n, d in enumerate(space.dims):
            if exact:
                b = _zeros((d, d), True)
                for i in range(d):
                    b[i, i] = Fraction(1)
            else:
                b = np.eye(d, dtype=complex)
            blocks[(n, n)] = b
        return cls(space, blocks, exact)

    @classmethod
    def diagonal(cls, space: GradedSpace, values: Sequence, exact: bool) -> "BlockOperator":
        """Operator acting on ``V(n)`` as multiplication by ``values[n]``."""
        eye = cls.identity(space, exact)
        blocks = {k: values[k[0]] * b for k, b in eye.blocks.items()}
        return cls(space, blocks, exact)

    @classmethod
    def from_dense(cls, space: GradedSpace, mat: np.ndarray, tail: Iterable[int] = ()) -> "BlockOperator":
        off = space.offsets()
        blocks = {}
        exact = mat.dtype == object
        for m, dm in enumerate(space.dims):
            for n, dn in enumerate(space.dims):
                b = mat[off[m]:off[m] + dm, off[n]:off[n] + dn]
                if dm and dn and not _is_zero(b):
                    blocks[(m, n)] = np.array(b)
        return cls(space, blocks, exact, tail)

    def to_dense(self) -> np.ndarray:
        off = self.space.offsets()
        tot = self.space.total_dim
        out = _zeros((tot, tot), self.exact)
        for (m, n), b in self.blocks.items():
            out[off[m]:off[m] + b.shape[0], off[n]:off[n] + b.shape[1]] = b
        return out

    def to_sparse(self):
        """Complex ``scipy.sparse`` CSR matrix of the whole operator."""
        import scipy.sparse as sp

        off = self.space.offsets()
        rows, cols, vals = [], [], []
        for (m, n), b in self.blocks.items():
            arr = to_complex(b)
            i, j = np.nonzero(arr)
            rows.append(i + off[m])
            cols.append(j + off[n])
            vals.append(arr[i, j])
        tot = self.space.total_dim
        if not rows:
            return sp.csr_matrix((tot, tot), dtype=complex)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(tot, tot)
        )

    def to_float(self) -> "BlockOperator":
        if not self.exact:
            return self
        cached = self.__dict__.get("_float")
        if cached is None:
            cached = BlockOperator(self.space, {k: to_complex(b) for k, b in self.blocks.items()}, False, self.tail)
            self._float = cached
        return cached

    def block(self, m: int, n: int) -> np.ndarray:
        b = self.blocks.get((m, n))
        if b is None:
            return _zeros((self.space.dims[m], self.space.dims[n]), self.exact)
        return b

    # algebra ------------------------------------------------------------
    def _pair(self, other: "BlockOperator"):
        if other.space != self.space:
            raise StructureError("operators act on different spaces")
        exact = self.exact and other.exact
        return (self if exact else self.to_float()), (other if exact else other.to_float()), exact

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        a, b, exact = self._pair(other)
        blocks = dict(a.blocks)
        for k, v in b.blocks.items():
            blocks[k] = blocks[k] + v if k in blocks else v
        return BlockOperator(self.space, blocks, exact, a.tail | b.tail)

    def __neg__(self) -> "BlockOperator":
        return BlockOperator(self.space, {k: -v for k, v in self.blocks.items()}, self.exact, self.tail)

    def __sub__(self, other: "BlockOperator") -> "BlockOperator":
        return self + (-other)

    def scale(self, c) -> "BlockOperator":
        if self.exact and is_exact_scalar(c):
            c = to_fraction(c)
            return BlockOperator(self.space, {k: c * v for k, v in self.blocks.items()}, True, self.tail)
        op = self.to_float()
        return BlockOperator(self.space, {k: complex(c) * v for k, v in op.blocks.items()}, False, self.tail)

    __rmul__ = scale

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        """Composition ``self o other``."""
        a, b, exact = self._pair(other)
        by_source: dict[int, list[tuple[int, np.ndarray]]] = {}
        for (m, n), blk in a.blocks.items():
            by_source.setdefault(n, []).append((m, blk))
        blocks: dict[tuple[int, int], np.ndarray] = {}
        tail = set(b.tail)
        for (t, s), bb in b.blocks.items():
            if t in a.tail:
                tail.add(s)
            for m, ab in by_source.get(t, ()):
                prod = ab @ bb
                key = (m, s)
                blocks[key] = blocks[key] + prod if key in blocks else prod
        return BlockOperator(self.space, blocks, exact, tail)

    def commutator(self, other: "BlockOperator") -> "BlockOperator":
        return self @ other - other @ self

    def transpose(self) -> "BlockOperator":
        return BlockOperator(self.space, {(n, m): b.T for (m, n), b in self.blocks.items()}, self.exact)

    def conjugate(self) -> "BlockOperator":
        if self.exact:
            return self
        return BlockOperator(self.space, {k: b.conj() for k, b in self.blocks.items()}, False, self.tail)

    # comparisons --------------------------------------------------------
    def trusted_sources(self, window: Iterable[int]) -> list[int]:
        return [n for n in window if n not in self.tail]

    def equals(self, other: "BlockOperator", sources: Iterable[int] | None = None, targets: Iterable[int] | None = None) -> bool:
        """Blockwise exact equality on the given sources (all by default)."""
        srcs = range(self.space.max_weight + 1) if sources is None else list(sources)
        tgts = range(self.space.max_weight + 1) if targets is None else list(targets)
        for n in srcs:
            for m in tgts:
                a, b = self.block(m, n), other.block(m, n)
                if a.dtype == object and b.dtype == object:
                    if not all(x == y for x, y in zip(a.flat, b.flat)):
                        return False
                elif not np.array_equal(to_complex(a), to_complex(b)):
                    return False
        return True

    def max_deviation(self, other: "BlockOperator", sources: Iterable[int] | None = None, targets: Iterable[int] | None = None) -> float:
        srcs = range(self.space.max_weight + 1) if sources is None else list(sources)
        tgts = range(self.space.max_weight + 1) if targets is None else list(targets)
        dev = 0.0
        for n in srcs:
            for m in tgts:
                a = to_complex(self.block(m, n))
                b = to_complex(other.block(m, n))
                if a.size:
                    dev = max(dev, float(np.max(np.abs(a - b))))
        return dev

    def is_zero(self, sources: Iterable[int] | None = None) -> bool:
        srcs = None if sources is None else set(sources)
        return all(_is_zero(b) for (m, n), b in self.blocks.items() if srcs is None or n in srcs)

    def restrict_sources(self, sources: Iterable[int]) -> "BlockOperator":
        keep = set(sources)
        return BlockOperator(
            self.space,
            {k: b for k, b in self.blocks.items() if k[1] in keep},
            self.exact,
            self.tail & keep,
        )

    def __repr__(self) -> str:
        kind = "exact" if self.exact else "float"
        return f"BlockOperator({kind}, blocks={sorted(self.blocks)}, tail={sorted(self.tail)})"

    # serialization ------------------------------------------------------
    def to_json(self) -> dict:
        def enc(x):
            if isinstance(x, Fraction):
                return [str(x.numerator), str(x.denominator)]
            x = complex(x)
            return [x.real, x.imag]

        return {
            "dims": list(self.space.dims),
            "exact": self.exact,
            "tail": sorted(self.tail),
            "blocks": [
                {"target": m, "source": n, "entries": [[enc(x) for x in row] for row in b]}
                for (m, n), b in sorted(self.blocks.items())
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BlockOperator":
        space = GradedSpace(tuple(data["dims"]))
        exact = data["exact"]
        blocks = {}
        for blk in data["blocks"]:
            m, n = blk["target"], blk["source"]
            if exact:
                rows = [[Fraction(int(p), int(q)) for p, q in row] for row in blk["entries"]]
                arr = exact_array(rows, (space.dims[m], space.dims[n]))
            else:
                rows = [[complex(re, im) for re, im in row] for row in blk["entries"]]
                arr = np.array(rows, dtype=complex).reshape(space.dims[m], space.dims[n])
            blocks[(m, n)] = arr
        return cls(space, blocks, exact, data.get("tail", ()))


def project_weight(v: GradedVector, n: int) -> GradedVector:
    """Keep only the weight-``n`` component of ``v``."""
    v.space.check_weight(n)
    comps = [c if k == n else _zeros(c.shape, v.exact) for k, c in enumerate(v.components)]
    return GradedVector(v.space, comps, v.exact, v.tail)


def apply(T: BlockOperator, v: GradedVector) -> GradedVector:
    """Apply ``T`` blockwise.  The result's tail flag records discarded output."""
    if T.space != v.space:
        raise StructureError("operator and vector live in different spaces")
    exact = T.exact and v.exact
    op = T if exact else T.to_float()
    vec = v if exact else v.to_float()
    comps = [_zeros((d,), exact) for d in v.space.dims]
    tail = v.tail
    for (m, n), b in op.blocks.items():
        comps[m] = comps[m] + b @ vec.components[n]
    for n in T.tail:
        if not _is_zero(vec.components[n]):
            tail = True
    return GradedVector(v.space, comps, exact, tail)


# exact linear algebra over Q (sympy's DomainMatrix does the elimination)


def _to_domain(arr: np.ndarray):
    from sympy import QQ
    from sympy.polys.matrices import DomainMatrix

    rows, cols = arr.shape
    data = [[QQ(to_fraction(x).numerator, to_fraction(x).denominator) for x in row] for row in arr]
    return DomainMatrix(data, (rows, cols), QQ)


def _from_domain(dm) -> np.ndarray:
    rows, cols = dm.shape
    out = np.empty((rows, cols), dtype=object)
    for i, row in enumerate(dm.to_list()):
        for j, x in enumerate(row):
            out[i, j] = Fraction(int(x.numerator), int(x.denominator))
    return out


def exact_rank(arr: np.ndarray) -> int:
    if arr.size == 0:
        return 0
    return int(_to_domain(arr).rank())


def exact_nullspace(arr: np.ndarray) -> np.ndarray:
    """Rows spanning the right kernel of ``arr``."""
    rows, cols = arr.shape
    if cols == 0:
        return np.zeros((0, 0), dtype=object)
    if rows == 0:
        return exact_array(np.eye(cols, dtype=int).tolist())
    ns = _to_domain(arr).nullspace()
    if ns.shape[0] == 0 or ns.shape[1] == 0:
        return np.zeros((0, cols), dtype=object)
    return _from_domain(ns)


def exact_rref(arr: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    """Reduced row echelon form with zero rows dropped, and pivot columns."""
    if arr.shape[0] == 0:
        return np.zeros((0, arr.shape[1]), dtype=object), ()
    r, piv = _to_domain(arr).rref()
    return _from_domain(r)[: len(piv)], tuple(piv)


def exact_det(arr: np.ndarray) -> Fraction:
    if arr.shape[0] == 0:
        return Fraction(1)
    x = _to_domain(arr).det()
    return Fraction(int(x.numerator), int(x.denominator))


def exact_inverse(arr: np.ndarray) -> np.ndarray:
    if arr.shape[0] == 0:
        return np.zeros((0, 0), dtype=object)
    return _from_domain(_to_domain(arr).inv())

"""Band-limited functions on the unit circle and the Moebius group acting on them.

Conventions
-----------
* ``e_n(z) = z**n``; a :class:`TestFunction` is a finite sum of these.
* ``L_m`` is the complexified vector field ``-i exp(i m theta) d/dtheta``, i.e.
  ``z**(m+1) d/dz``.  A :class:`LieElement` ``c_{-1} L_{-1} + c_0 L_0 + c_1 L_1``
  corresponds to the traceless matrix ``[[c_0/2, c_{-1}], [-c_1, -c_0/2]]`` and
  its exponential to the flow of the vector field.
* ``MoebiusElement(a, b)`` is ``z -> (a z + b) / (conj(b) z + conj(a))`` with
  ``|a|^2 - |b|^2 = 1``; the sign of ``(a, b)`` is fixed by ``Re a > 0`` (or
  ``Im a > 0`` when ``Re a == 0``).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import BranchCutError, TruncationError

__all__ = [
    "TestFunction",
    "MoebiusElement",
    "LieElement",
    "from_samples",
    "sample",
    "fft_size",
    "sobolev_norm",
    "beta_action",
    "default_band_out",
    "alpha_automorphism",
    "exp_lie",
    "log_moebius",
    "reflect_transform",
]

DET_TOL = 1e-12


def fft_size(band: int) -> int:
    """Smallest power of two >= 4 (band + 1)."""
    need = 4 * (band + 1)
    return 1 << (need - 1).bit_length()


def _exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


@dataclass(frozen=True)
class TestFunction:
    """Trigonometric polynomial ``sum_n coeffs[n] z**n`` with ``|n| <= band``.

    Coefficients are complex floats, or exact rationals when built from exact
    data (``TestFunction.e(n)`` is exact).
    """

    __test__ = False  # not a pytest class

    coeffs: Mapping[int, complex]
    band: int

    def __post_init__(self):
        if self.band < 0:
            raise ValueError("band must be non-negative")
        clean = {}
        for n, c in self.coeffs.items():
            if abs(n) > self.band:
                if c != 0:
                    raise ValueError(f"coefficient at {n} outside band {self.band}")
                continue
            if c != 0:
                clean[int(n)] = c if _exact(c) else complex(c)
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    @classmethod
    def e(cls, n: int, band: int | None = None) -> "TestFunction":
        return cls({n: Fraction(1)}, abs(n) if band is None else band)

    @classmethod
    def zero(cls, band: int = 0) -> "TestFunction":
        return cls({}, band)

    @property
    def is_exact(self) -> bool:
        return all(_exact(c) for c in self.coeffs.values())

    def coefficient(self, n: int):
        return self.coeffs.get(n, 0)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for n, c in self.coeffs.items():
            out = out + complex(c) * z ** n
        return out

    def on_angles(self, theta):
        return self(np.exp(1j * np.asarray(theta, dtype=float)))

    def __add__(self, other: "TestFunction") -> "TestFunction":
        coeffs = dict(self.coeffs)
        for n, c in other.coeffs.items():
            coeffs[n] = coeffs.get(n, 0) + c
        return TestFunction(coeffs, max(self.band, other.band))

    def scale(self, c) -> "TestFunction":
        return TestFunction({n: c * x for n, x in self.coeffs.items()}, self.band)

    __rmul__ = scale

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + other.scale(-1)

    def derivative(self) -> "TestFunction":
        """d/dtheta."""
        return TestFunction({n: 1j * n * complex(c) for n, c in self.coeffs.items()}, self.band)

    def max_coeff_deviation(self, other: "TestFunction") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(complex(self.coefficient(n)) - complex(other.coefficient(n))) for n in keys), default=0.0)

    def to_json(self) -> dict:
        return {
            "band": self.band,
            "coeffs": [[n, complex(c).real, complex(c).imag] for n, c in sorted(self.coeffs.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TestFunction":
        return cls({int(n): complex(re, im) for n, re, im in data["coeffs"]}, int(data["band"]))


def from_samples(values, band: int) -> TestFunction:
    """Fourier coefficients ``|n| <= band`` from samples at ``exp(2 pi i j / S)``."""
    values = np.asarray(values, dtype=complex)
    size = values.shape[0]
    if size < 2 * band + 1:
        raise ValueError(f"{size} samples cannot resolve band {band} (need >= {2 * band + 1})")
    fhat = np.fft.fft(values) / size
    return TestFunction({n: fhat[n % size] for n in range(-band, band + 1)}, band)


def sample(func: Callable[[np.ndarray], np.ndarray], band: int, size: int | None = None) -> TestFunction:
    """Band-``band`` projection of ``func`` (a function of the angle theta)."""
    size = fft_size(band) if size is None else size
    theta = 2 * np.pi * np.arange(size) / size
    return from_samples(func(theta), band)


def sobolev_norm(f: TestFunction, N: float) -> float:
    """``(sum |f_n|^2 (1 + n^2)^N)^(1/2)``."""
    return math.sqrt(sum(abs(complex(c)) ** 2 * (1 + n * n) ** N for n, c in f.coeffs.items()))


class LieElement:
    """``c_{-1} L_{-1} + c_0 L_0 + c_1 L_1`` in the complexified Lie algebra."""

    def __init__(self, cm1: complex = 0, c0: complex = 0, c1: complex = 0):
        self.coeffs: dict[int, complex] = {-1: cm1, 0: c0, 1: c1}

    @classmethod
    def basis(cls, m: int) -> "LieElement":
        return cls(*[1 if k == m else 0 for k in (-1, 0, 1)])

    @classmethod
    def rotation(cls) -> "LieElement":
        """d/dtheta; generates the rotations."""
        return cls(0, 1j, 0)

    @classmethod
    def hyperbolic_sin(cls) -> "LieElement":
        """-2 sin(theta) d/dtheta."""
        return cls(1, 0, -1)

    @classmethod
    def hyperbolic_cos(cls) -> "LieElement":
        """2 cos(theta) d/dtheta."""
        return cls(1j, 0, 1j)

    @classmethod
    def real_basis(cls) -> list["LieElement"]:
        return [cls.rotation(), cls.hyperbolic_sin(), cls.hyperbolic_cos()]

    @property
    def is_real(self) -> bool:
        cm1, c0, c1 = (complex(self.coeffs[k]) for k in (-1, 0, 1))
        scale = max(1.0, abs(cm1), abs(c0), abs(c1))
        return abs(c0.real) <= 1e-12 * scale and abs(cm1 + c1.conjugate()) <= 1e-12 * scale

    def __add__(self, other: "LieElement") -> "LieElement":
        return LieElement(*[self.coeffs[k] + other.coeffs[k] for k in (-1, 0, 1)])

    def scale(self, t) -> "LieElement":
        return LieElement(*[t * self.coeffs[k] for k in (-1, 0, 1)])

    __rmul__ = scale

    def bracket(self, other: "LieElement") -> "LieElement":
        out = {-1: 0, 0: 0, 1: 0}
        for m, a in self.coeffs.items():
            for n, b in other.coeffs.items():
                if a == 0 or b == 0 or abs(m + n) > 1:
                    continue
                out[m + n] = out[m + n] + (m - n) * a * b
        return LieElement(out[-1], out[0], out[1])

    def matrix(self) -> np.ndarray:
        cm1, c0, c1 = (complex(self.coeffs[k]) for k in (-1, 0, 1))
        return np.array([[c0 / 2, cm1], [-c1, -c0 / 2]], dtype=complex)

    @classmethod
    def from_matrix(cls, B: np.ndarray) -> "LieElement":
        return cls(B[0, 1], B[0, 0] - B[1, 1], -B[1, 0])

    def vector_field(self) -> TestFunction:
        """The function ``g`` with ``X = g(theta) d/dtheta``."""
        return TestFunction({m: -1j * complex(c) for m, c in self.coeffs.items()}, 1)

    def norm(self) -> float:
        return max(abs(complex(c)) for c in self.coeffs.values())

    def close_to(self, other: "LieElement", tol: float = 1e-10) -> bool:
        return all(abs(complex(self.coeffs[k]) - complex(other.coeffs[k])) <= tol for k in (-1, 0, 1))

    def __repr__(self) -> str:
        return "LieElement({}, {}, {})".format(*(self.coeffs[k] for k in (-1, 0, 1)))


class MoebiusElement:
    """Element of PSU(1,1) acting on the circle by ``(a z + b)/(conj(b) z + conj(a))``."""

    def __init__(self, a: complex, b: complex, check: bool = True):
        a, b = complex(a), complex(b)
        if check and abs(abs(a) ** 2 - abs(b) ** 2 - 1) > DET_TOL * max(1.0, abs(a) ** 2):
            raise ValueError(f"|a|^2 - |b|^2 = {abs(a) ** 2 - abs(b) ** 2}, expected 1")
        if a.real < 0 or (a.real == 0 and a.imag < 0):
            a, b = -a, -b
        self.a = a
        self.b = b

    @classmethod
    def identity(cls) -> "MoebiusElement":
        return cls(1, 0)

    @classmethod
    def rotation(cls, phi: float) -> "MoebiusElement":
        return cls(cmath.exp(0.5j * phi), 0)

    @classmethod
    def from_matrix(cls, A: np.ndarray, check: bool = True) -> "MoebiusElement":
        return cls(A[0, 0], A[0, 1], check)

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 1.0) -> "MoebiusElement":
        r = scale * rng.random()
        b = r * cmath.exp(2j * math.pi * rng.random())
        a = math.sqrt(1 + abs(b) ** 2) * cmath.exp(2j * math.pi * rng.random())
        return cls(a, b)

    def matrix(self) -> np.ndarray:
        a, b = self.a, self.b
        return np.array([[a, b], [b.conjugate(), a.conjugate()]], dtype=complex)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * z + self.b) / (self.b.conjugate() * z + self.a.conjugate())

    def inverse(self) -> "MoebiusElement":
        return MoebiusElement(self.a.conjugate(), -self.b, check=False)

    def __matmul__(self, other: "MoebiusElement") -> "MoebiusElement":
        """Composition ``self o other``."""
        return MoebiusElement.from_matrix(self.matrix() @ other.matrix(), check=False)

    def jacobian(self, z):
        """``X_gamma(z) = -i d/dtheta log gamma(e^{i theta})`` at ``z = e^{i theta}``."""
        z = np.asarray(z, dtype=complex)
        return z / ((self.a * z + self.b) * (self.b.conjugate() * z + self.a.conjugate()))

    def decay_ratio(self) -> float:
        """|b|/|a|: geometric decay rate of Fourier coefficients of pullbacks."""
        return abs(self.b) / abs(self.a)

    def close_to(self, other: "MoebiusElement", tol: float = 1e-10) -> bool:
        return abs(self.a - other.a) <= tol and abs(self.b - other.b) <= tol

    def __repr__(self) -> str:
        return f"MoebiusElement(a={self.a:.6g}, b={self.b:.6g})"


def alpha_automorphism(gamma: MoebiusElement) -> MoebiusElement:
    """``z -> 1/gamma(1/z)``: entrywise conjugation of the matrix."""
    return MoebiusElement(gamma.a.conjugate(), gamma.b.conjugate(), check=False)


def _sinhc(s: complex) -> complex:
    if abs(s) < 1e-6:
        return 1 + s * s / 6
    return cmath.sinh(s) / s


def exp_lie(X: LieElement, t: float = 1.0) -> MoebiusElement:
    """``exp(t X)`` for ``X`` in the real form, via the closed 2x2 exponential."""
    if not X.is_real:
        raise ValueError("exp_lie needs an element of the real form Lie(Mob)")
    B = t * X.matrix()
    delta = B[0, 0] ** 2 + B[0, 1] * B[1, 0]
    s = cmath.sqrt(delta)
    A = cmath.cosh(s) * np.eye(2) + _sinhc(s) * B
    return MoebiusElement.from_matrix(A)


def log_moebius(gamma: MoebiusElement, tol: float = 1e-12) -> LieElement:
    """Principal logarithm.  Raises :class:`BranchCutError` for rotations by pi."""
    ch = gamma.a.real
    if ch <= tol:
        raise BranchCutError("rotation by pi: log is ambiguous; split gamma into two factors")
    if abs(ch - 1) < 1e-14:
        s = 0j
    elif ch > 1:
        s = complex(math.acosh(ch))
    else:
        s = 1j * math.acos(ch)
    B = (gamma.matrix() - ch * np.eye(2)) / _sinhc(s)
    # project onto the real form to strip round-off
    i_c = 0.5 * (B[0, 0] - B[1, 1]).imag
    d = 0.5 * (B[0, 1] + B[1, 0].conjugate())
    return LieElement(d, 2j * i_c, -d.conjugate())


def default_band_out(gamma: MoebiusElement, band: int, eps: float = 1e-16) -> int:
    rho = gamma.decay_ratio()
    if rho < 1e-300:
        return 2 * band
    heuristic = math.ceil(math.log(eps) / (8 * math.log(rho)))
    return 2 * band + 8 * heuristic


def beta_action(
    d: int,
    gamma: MoebiusElement,
    f: TestFunction,
    band_out: int | None = None,
    tol: float = 1e-12,
) -> TestFunction:
    """Band-limited ``z -> X_gamma(gamma^-1 z)^(d-1) f(gamma^-1 z)``.

    Raises :class:`TruncationError` carrying the discarded L2 tail mass when it
    exceeds ``tol``.
    """
    if band_out is None:
        band_out = default_band_out(gamma, f.band)
    size = fft_size(band_out)
    z = np.exp(2j * np.pi * np.arange(size) / size)
    w = gamma.inverse()(z)
    x = gamma.jacobian(w)
    if np.max(np.abs(x.imag)) > 1e-9 * np.max(np.abs(x)) or np.min(x.real) <= 0:
        raise ValueError("Jacobian not real positive; gamma does not preserve the circle")
    values = x.real ** (d - 1) * f(w)
    fhat = np.fft.fft(values) / size
    idx = np.arange(size)
    modes = np.where(idx < size // 2, idx, idx - size)
    tail = float(np.sqrt(np.sum(np.abs(fhat[np.abs(modes) > band_out]) ** 2)))
    if tail > tol:
        raise TruncationError(f"band {band_out} discards tail mass {tail:.3e}", mass=tail)
    return TestFunction({n: fhat[n % size] for n in range(-band_out, band_out + 1)}, band_out)


def reflect_transform(f: TestFunction, mode: str) -> TestFunction:
    """``invert``: f(1/z); ``conjugate``: conj(f); ``conjugate_invert``: conj(f)(1/z)."""
    if mode == "invert":
        coeffs = {-n: c for n, c in f.coeffs.items()}
    elif mode == "conjugate":
        coeffs = {-n: _conj(c) for n, c in f.coeffs.items()}
    elif mode == "conjugate_invert":
        coeffs = {n: _conj(c) for n, c in f.coeffs.items()}
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return TestFunction(coeffs, f.band)


def _conj(c):
    return c if _exact(c) else complex(c).conjugate()


def raised_cosine_bump(center: float, half_width: float) -> Callable[[np.ndarray], np.ndarray]:
    """C^1 bump ``(1 + cos(pi (theta - center)/half_width))/2`` supported on one arc."""

    def bump(theta):
        delta = np.angle(np.exp(1j * (np.asarray(theta) - center)))
        out = 0.5 * (1 + np.cos(np.pi * delta / half_width))
        return np.where(np.abs(delta) < half_width, out, 0.0)

    return bump

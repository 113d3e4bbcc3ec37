"""Two-sided trigonometric polynomial arithmetic on the unit circle.

Finitely supported coefficient sequences sum(c_j z^j), convolution against
multiplier kernels (de la Vallee-Poussin trapezoids in dyadic and linear
cutoff variants, Dirichlet projections), sup and Lp norms with a certified
sampling bound, and the dyadic-block smoothness seminorm built from the
trapezoid windows.

Kernel multipliers are exact rationals; the convolution path applies them as
correctly rounded floats while the nesting-identity check runs in exact
integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "LaurentPolynomial",
    "KernelSpec",
    "CircleGrid",
    "KernelDomainError",
    "SupBound",
    "vallee_poussin",
    "modified_v",
    "modified_vp",
    "dirichlet",
    "kernel_multiplier",
    "kernel_support",
    "kernel_coeffs",
    "convolve",
    "kernel_identity_vk_vpn",
    "grid_nodes",
    "sample_on_grid",
    "sup_norm",
    "sup_norm_certified",
    "lp_norm",
    "besov_seminorm",
]

VALLEE_POUSSIN = "vallee_poussin"
MODIFIED_V = "modified_v"
MODIFIED_VP = "modified_vp"
DIRICHLET = "dirichlet"

_KINDS = (VALLEE_POUSSIN, MODIFIED_V, MODIFIED_VP, DIRICHLET)


class KernelDomainError(ValueError):
    """Arguments outside the range where a kernel statement is claimed."""


def _next_pow2(m: int) -> int:
    n = 1
    while n < m:
        n <<= 1
    return n


class LaurentPolynomial:
    """Finite two-sided coefficient sequence c_lo z^lo + ... + c_hi z^hi.

    Coefficients are stored contiguously.  dtype is complex128 for the
    53-bit tag; higher precision tags store mpmath complex numbers in an
    object array.  Construction trims exact zeros at both ends; the zero
    polynomial is canonically lo=0, coeffs=[0].
    """

    __slots__ = ("lo", "coeffs", "precision")

    def __init__(self, lo: int, coeffs, precision: int = 53):
        arr = np.asarray(coeffs)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coefficients must form a nonempty 1-d sequence")
        if arr.dtype != object:
            arr = arr.astype(np.complex128)
        nz = np.flatnonzero(arr != 0)
        if nz.size == 0:
            lo = 0
            arr = np.zeros(1, dtype=np.complex128)
        else:
            arr = arr[nz[0] : nz[-1] + 1].copy()
            lo = int(lo) + int(nz[0])
        self.lo = int(lo)
        self.coeffs = arr
        self.precision = int(precision)

    # ------------------------------------------------------------------
    @property
    def hi(self) -> int:
        return self.lo + len(self.coeffs) - 1

    @property
    def span(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    def coefficient(self, j: int):
        if self.lo <= j <= self.hi:
            return self.coeffs[j - self.lo]
        return 0.0 + 0.0j

    def as_complex128(self) -> "LaurentPolynomial":
        if self.coeffs.dtype == np.complex128:
            return self
        arr = np.array([complex(c) for c in self.coeffs], dtype=np.complex128)
        return LaurentPolynomial(self.lo, arr, precision=53)

    def __call__(self, z):
        """Evaluate by two-sided Horner; z may be a scalar or ndarray."""
        acc = self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            acc = acc * z + c
        if self.lo:
            acc = acc * z**self.lo
        return acc

    def derivative(self) -> "LaurentPolynomial":
        js = np.arange(self.lo, self.hi + 1)
        return LaurentPolynomial(self.lo - 1, self.coeffs * js, self.precision)

    def times_z_power(self, m: int) -> "LaurentPolynomial":
        return LaurentPolynomial(self.lo + m, self.coeffs, self.precision)

    def conj_reflect(self) -> "LaurentPolynomial":
        """conj(f(1/conj(z))): coefficient at j becomes conj(c_{-j})."""
        if self.coeffs.dtype == object:
            rev = np.array([c.conjugate() for c in self.coeffs[::-1]], dtype=object)
        else:
            rev = np.conj(self.coeffs[::-1])
        return LaurentPolynomial(-self.hi, rev, self.precision)

    def __add__(self, other: "LaurentPolynomial") -> "LaurentPolynomial":
        lo = min(self.lo, other.lo)
        hi = max(self.hi, other.hi)
        out = np.zeros(hi - lo + 1, dtype=np.complex128)
        out[self.lo - lo : self.lo - lo + len(self.coeffs)] += self.coeffs
        out[other.lo - lo : other.lo - lo + len(other.coeffs)] += other.coeffs
        return LaurentPolynomial(lo, out, max(self.precision, other.precision))

    def __sub__(self, other: "LaurentPolynomial") -> "LaurentPolynomial":
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return LaurentPolynomial(self.lo, self.coeffs * scalar, self.precision)

    __rmul__ = __mul__

    def to_pairs(self) -> list:
        """JSON form: list of [exponent, re, im] triples."""
        out = []
        for j, c in zip(range(self.lo, self.hi + 1), self.coeffs):
            cc = complex(c)
            out.append([int(j), cc.real, cc.imag])
        return out

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence]) -> "LaurentPolynomial":
        items = [(int(j), complex(re, im)) for j, re, im in pairs]
        if not items:
            return cls.zero()
        lo = min(j for j, _ in items)
        hi = max(j for j, _ in items)
        arr = np.zeros(hi - lo + 1, dtype=np.complex128)
        for j, c in items:
            arr[j - lo] += c
        return cls(lo, arr)

    @classmethod
    def zero(cls) -> "LaurentPolynomial":
        return cls(0, [0.0])

    @classmethod
    def monomial(cls, j: int, c=1.0) -> "LaurentPolynomial":
        return cls(j, [c])

    def __repr__(self) -> str:  # pragma: no cover
        return f"LaurentPolynomial(lo={self.lo}, hi={self.hi}, precision={self.precision})"


# ----------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class KernelSpec:
    """A convolution kernel named by its multiplier family and index."""

    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.index < 0:
            raise ValueError("kernel index must be >= 0")


def vallee_poussin(n: int) -> KernelSpec:
    return KernelSpec(VALLEE_POUSSIN, n)


def modified_v(k: int) -> KernelSpec:
    return KernelSpec(MODIFIED_V, k)


def modified_vp(n: int) -> KernelSpec:
    return KernelSpec(MODIFIED_VP, n)


def dirichlet(n: int) -> KernelSpec:
    return KernelSpec(DIRICHLET, n)


def kernel_multiplier(spec: KernelSpec, j: int) -> Fraction:
    """Exact multiplier value of the kernel at frequency j.

    vallee_poussin(0) is 1 at j in {0, 1}.  For n >= 1 the multiplier is the
    dyadic trapezoid: 1 at 2^n, 0 outside the open interval (2^(n-1), 2^(n+1)),
    affine on both closed slopes.  modified_v(k) is the symmetric dyadic
    plateau (1 on [-2^(k-1), 2^(k-1)], 0 for |j| >= 2^k).  modified_vp(n) is
    the symmetric linear plateau (1 on [-n, n], 0 for |j| >= 2n).
    dirichlet(n) is the indicator of [0, n].
    """
    n = spec.index
    if spec.kind == VALLEE_POUSSIN:
        if n == 0:
            return Fraction(1) if j in (0, 1) else Fraction(0)
        a = 1 << (n - 1)
        if j <= a or j >= 4 * a:
            return Fraction(0)
        if j <= 2 * a:
            return Fraction(j - a, a)
        return Fraction(4 * a - j, 2 * a)
    if spec.kind == MODIFIED_V:
        if n == 0:
            return Fraction(1) if j == 0 else Fraction(0)
        a = 1 << (n - 1)
        aj = abs(j)
        if aj <= a:
            return Fraction(1)
        if aj >= 2 * a:
            return Fraction(0)
        return Fraction(2 * a - aj, a)
    if spec.kind == MODIFIED_VP:
        if n == 0:
            return Fraction(1) if j == 0 else Fraction(0)
        aj = abs(j)
        if aj <= n:
            return Fraction(1)
        if aj >= 2 * n:
            return Fraction(0)
        return Fraction(2 * n - aj, n)
    # DIRICHLET
    return Fraction(1) if 0 <= j <= n else Fraction(0)


def kernel_support(spec: KernelSpec) -> tuple[int, int]:
    """Closed interval [lo, hi] containing all nonzero multipliers."""
    n = spec.index
    if spec.kind == VALLEE_POUSSIN:
        if n == 0:
            return (0, 1)
        a = 1 << (n - 1)
        return (a + 1, 4 * a - 1)
    if spec.kind == MODIFIED_V:
        if n == 0:
            return (0, 0)
        b = (1 << n) - 1
        return (-b, b)
    if spec.kind == MODIFIED_VP:
        if n == 0:
            return (0, 0)
        return (-(2 * n - 1), 2 * n - 1)
    return (0, n)


def _multiplier_scaled(spec: KernelSpec, js: np.ndarray) -> tuple[np.ndarray, int]:
    """Multipliers as (integer numerators, common denominator), exactly."""
    n = spec.index
    num = np.zeros(js.shape, dtype=np.int64)
    if spec.kind == VALLEE_POUSSIN:
        if n == 0:
            num[(js == 0) | (js == 1)] = 1
            return num, 1
        a = 1 << (n - 1)
        up = (a < js) & (js <= 2 * a)
        num[up] = 2 * (js[up] - a)  # denominator 2a
        down = (2 * a < js) & (js < 4 * a)
        num[down] = 4 * a - js[down]
        return num, 2 * a
    if spec.kind == MODIFIED_V:
        if n == 0:
            num[js == 0] = 1
            return num, 1
        a = 1 << (n - 1)
        aj = np.abs(js)
        num[aj <= a] = a
        mid = (a < aj) & (aj < 2 * a)
        num[mid] = 2 * a - aj[mid]
        return num, a
    if spec.kind == MODIFIED_VP:
        if n == 0:
            num[js == 0] = 1
            return num, 1
        aj = np.abs(js)
        num[aj <= n] = n
        mid = (n < aj) & (aj < 2 * n)
        num[mid] = 2 * n - aj[mid]
        return num, n
    num[(0 <= js) & (js <= n)] = 1
    return num, 1


def _multiplier_array(spec: KernelSpec, lo: int, hi: int) -> np.ndarray:
    js = np.arange(lo, hi + 1, dtype=np.int64)
    num, den = _multiplier_scaled(spec, js)
    return num.astype(np.float64) / float(den)


def kernel_coeffs(spec: KernelSpec) -> LaurentPolynomial:
    lo, hi = kernel_support(spec)
    return LaurentPolynomial(lo, _multiplier_array(spec, lo, hi))


def convolve(f: LaurentPolynomial, spec: KernelSpec) -> LaurentPolynomial:
    """Coefficientwise product with the kernel multiplier: (f * K)^(j) = f^(j) K^(j)."""
    klo, khi = kernel_support(spec)
    lo = max(f.lo, klo)
    hi = min(f.hi, khi)
    if f.is_zero or lo > hi:
        return LaurentPolynomial.zero()
    mults = _multiplier_array(spec, lo, hi)
    chunk = f.coeffs[lo - f.lo : hi - f.lo + 1]
    return LaurentPolynomial(lo, chunk * mults, f.precision)


def kernel_identity_vk_vpn(k: int, n: int) -> bool:
    """Exact check that modified_v(k) is reproduced by modified_vp(n).

    Verifies coefficientwise, in integer arithmetic, that the product of the
    two multipliers equals the modified_v(k) multiplier at every frequency.
    Claimed only for 2^k <= n; other arguments raise KernelDomainError.
    """
    if k < 0 or n < 1:
        raise KernelDomainError("need k >= 0 and n >= 1")
    if (1 << k) > n:
        raise KernelDomainError(f"identity not claimed for 2^{k} > {n}")
    vk = modified_v(k)
    vpn = modified_vp(n)
    width = max(1 << k, 2 * n)
    js = np.arange(-width, width + 1, dtype=np.int64)
    num_k, den_k = _multiplier_scaled(vk, js)
    num_vp, den_vp = _multiplier_scaled(vpn, js)
    # (num_k/den_k)*(num_vp/den_vp) == num_k/den_k  <=>  num_k*(num_vp - den_vp) == 0
    return bool(np.all(num_k * (num_vp - den_vp) == 0))


# ----------------------------------------------------------------------
# grids and norms


@dataclass(frozen=True)
class CircleGrid:
    """Equispaced samples f(exp(2 pi i p / size)), size a power of two."""

    size: int
    values: np.ndarray

    def __post_init__(self):
        if self.size & (self.size - 1) or self.size <= 0:
            raise ValueError("grid size must be a power of two")
        if len(self.values) != self.size:
            raise ValueError("values length must equal size")


def grid_nodes(size: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(size) / size)


def _analytic_values(coeffs: np.ndarray, size: int) -> np.ndarray:
    """Values of sum c_j z^j (j >= 0) at the size-point grid via FFT."""
    padded = np.zeros(size, dtype=np.complex128)
    for start in range(0, len(coeffs), size):
        chunk = coeffs[start : start + size]
        padded[: len(chunk)] += chunk
    return np.fft.ifft(padded) * size


def sample_on_grid(f: LaurentPolynomial, size: int | None = None, oversample: int = 4) -> CircleGrid:
    g = f.as_complex128()
    m = _next_pow2(max(size or 1, oversample * (g.span + 1), 4))
    vals = _analytic_values(g.coeffs, m)
    if g.lo:
        vals = vals * grid_nodes(m) ** g.lo
    return CircleGrid(m, vals)


class SupBound(NamedTuple):
    value: float
    upper: float


def _horner(coeffs: np.ndarray, z: complex) -> complex:
    acc = coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def _sup_with_bound(f: LaurentPolynomial, oversample: int) -> SupBound:
    if oversample < 4:
        raise ValueError("oversample must be >= 4")
    g = f.as_complex128()
    if g.is_zero:
        return SupBound(0.0, 0.0)
    c = g.coeffs  # |f| on the circle equals |analytic part of degree span|
    d = len(c) - 1
    m = _next_pow2(max(oversample * (d + 1), 64))
    vals = _analytic_values(c, m)
    av = np.abs(vals)
    kbest = int(np.argmax(av))
    best = float(av[kbest])
    grid_max = best
    # three Newton steps on |f|^2 along the circle from the best node
    if d > 0:
        js = np.arange(d + 1)
        c1 = c * js
        c1 = c1[1:] if len(c1) > 1 else np.zeros(1, dtype=np.complex128)
        c2 = (c * js * (js - 1))[2:] if d >= 2 else np.zeros(1, dtype=np.complex128)
        theta = 2.0 * np.pi * kbest / m
        h = 2.0 * np.pi / m
        for _ in range(3):
            w = np.exp(1j * theta)
            g0 = _horner(c, w)
            g1 = _horner(c1, w) if len(c1) else 0.0
            g2 = _horner(c2, w) if len(c2) else 0.0
            q1 = 2.0 * (np.conj(g0) * g1 * 1j * w).real
            q2 = 2.0 * (abs(g1) ** 2 - (np.conj(g0) * (g2 * w * w + g1 * w)).real)
            if q2 >= 0.0:
                break
            step = -q1 / q2
            if abs(step) > h:
                step = np.copysign(h, step)
            theta += step
            best = max(best, float(abs(_horner(c, np.exp(1j * theta)))))
    relgap = np.pi * d / m
    upper = grid_max / (1.0 - relgap) if relgap < 1.0 else np.inf
    return SupBound(best, max(upper, best))


def sup_norm(f: LaurentPolynomial, oversample: int = 16) -> float:
    """Sup of |f| on the unit circle.

    Equispaced power-of-two sampling followed by three Newton refinements of
    |f|^2 from the best node.  The returned value is a lower estimate that is
    guaranteed >= true sup / (1 + pi*span/M) for the M-point grid; use
    sup_norm_certified for the matching upper bound.
    """
    return _sup_with_bound(f, oversample).value


def sup_norm_certified(f: LaurentPolynomial, oversample: int = 16) -> SupBound:
    """(value, upper) with value <= sup|f| <= upper."""
    return _sup_with_bound(f, oversample)


def lp_norm(f: LaurentPolynomial, p) -> float:
    """L^p(dm) norm on the circle for p in {1, 2, inf}.

    p=2 is Parseval, exact from coefficients; p=1 uses grid quadrature with
    at least 8 nodes per coefficient; p=inf delegates to sup_norm.
    """
    g = f.as_complex128()
    if p == 2:
        return float(np.sqrt(np.sum(np.abs(g.coeffs) ** 2)))
    if p == 1:
        if g.is_zero:
            return 0.0
        m = _next_pow2(max(8 * (g.span + 1), 256))
        vals = _analytic_values(g.coeffs, m)
        return float(np.mean(np.abs(vals)))
    if p in (np.inf, float("inf"), "inf"):
        return sup_norm(g)
    raise ValueError("p must be 1, 2 or inf")


def besov_seminorm(f: LaurentPolynomial, s: float, p) -> float:
    """sup over dyadic windows n of 2^(n s) * ||f * W_n||_p.

    W_n is the vallee_poussin(n) trapezoid; the n=0 window is the multiplier
    carried by 1 + z.  Only analytic inputs (nonnegative exponents) are
    accepted.
    """
    g = f.as_complex128()
    if g.is_zero:
        return 0.0
    if g.lo < 0:
        raise ValueError("besov seminorm requires nonnegative exponents")
    best = 0.0
    n = 0
    while True:
        spec = vallee_poussin(n)
        lo_s, _ = kernel_support(spec)
        if lo_s > g.hi:
            break
        block = convolve(g, spec)
        if not block.is_zero:
            best = max(best, float(2.0 ** (n * s)) * lp_norm(block, p))
        n += 1
    return best

"""Finite Blaschke products with a dilated outer corrector.

Given zeros z_1..z_n inside the unit disk and a dilation radius R > 1, the
corrector phi0(z) = prod (1 - conj(z_k) z)/(1 - conj(z_k) z / R^2) is outer,
equals 1 at the origin, and the combined product B(z) phi0(z) coincides with
R^n times the Blaschke product whose zeros are z_k / R evaluated at z / R.
That dilated form is unimodular-factor stable and is the evaluation route for
every certified quantity here: sup norms on the circle, derivative sup norms
(closed-form logarithmic differentiation at order 1, Cauchy-integral
quadrature on an intermediate circle at higher orders), Taylor coefficients
with a certified aliasing bound, and the per-instance certificate records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from szego_lab.circle_fourier import (
    LaurentPolynomial,
    besov_seminorm,
    grid_nodes,
    _next_pow2,
)

__all__ = [
    "INSIDE_DISK",
    "OUTSIDE_DISK",
    "ZeroSet",
    "BlaschkeProduct",
    "DilatedCorrector",
    "PoleProximityError",
    "TaylorToleranceError",
    "DerivSup",
    "eval_blaschke",
    "build_corrector",
    "corrector_with_radius",
    "eval_phi0",
    "eval_B_phi",
    "derivative_sup",
    "taylor_coeffs",
    "corrector_certificate",
]

INSIDE_DISK = "inside_disk"
OUTSIDE_DISK = "outside_disk"

_POLE_TOL = 2.0 ** -40


class PoleProximityError(ValueError):
    """Evaluation point within 2^-40 of a pole of the product."""


class TaylorToleranceError(ArithmeticError):
    """Requested aliasing tolerance unreachable; carries the achieved bound."""

    def __init__(self, achieved: float, tol: float):
        self.achieved = achieved
        self.tol = tol
        super().__init__(
            f"aliasing tolerance {tol:g} unreachable; achieved bound {achieved:g}"
        )


@dataclass(frozen=True)
class ZeroSet:
    """Finite multiset of zeros, all strictly inside or all strictly outside
    the unit circle.  Multiplicity by repetition."""

    zeros: tuple
    where: str = INSIDE_DISK

    def __post_init__(self):
        zs = tuple(complex(z) for z in self.zeros)
        object.__setattr__(self, "zeros", zs)
        if self.where not in (INSIDE_DISK, OUTSIDE_DISK):
            raise ValueError(f"unknown location tag {self.where!r}")
        if self.where == INSIDE_DISK:
            bad = [z for z in zs if abs(z) >= 1.0]
        else:
            bad = [z for z in zs if abs(z) <= 1.0]
        if bad:
            raise ValueError(f"zeros violate {self.where}: {bad[:3]}")

    def __len__(self) -> int:
        return len(self.zeros)

    def __iter__(self):
        return iter(self.zeros)

    @property
    def blaschke_sum(self) -> float:
        if self.where == INSIDE_DISK:
            return float(sum(1.0 - abs(z) for z in self.zeros))
        return float(sum(abs(z) - 1.0 for z in self.zeros))

    def reflected(self) -> "ZeroSet":
        """Image under z -> 1/conj(z), swapping inside and outside."""
        flipped = tuple(1.0 / z.conjugate() for z in self.zeros)
        other = OUTSIDE_DISK if self.where == INSIDE_DISK else INSIDE_DISK
        return ZeroSet(flipped, other)

    def to_json(self) -> list:
        return [[z.real, z.imag] for z in self.zeros]

    @classmethod
    def from_json(cls, pairs: Iterable[Sequence[float]], where: str = INSIDE_DISK) -> "ZeroSet":
        return cls(tuple(complex(re, im) for re, im in pairs), where)


def _factor_rotations(zeros: np.ndarray) -> np.ndarray:
    """Per-factor unimodular multipliers making the product positive at 0."""
    rot = np.ones(len(zeros), dtype=np.complex128)
    nz = zeros != 0
    rot[nz] = -np.abs(zeros[nz]) / zeros[nz]
    return rot


@dataclass(frozen=True)
class BlaschkeProduct:
    """Product of disk automorphism factors vanishing at the given zeros.

    Each factor (z - z_k)/(1 - conj(z_k) z) carries the multiplier
    -|z_k|/z_k (plain z for z_k = 0), so the value at 0 is prod |z_k| >= 0.
    An extra global rotation may be supplied; the default keeps positivity.
    """

    zeros: ZeroSet
    rotation: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.zeros.where != INSIDE_DISK:
            raise ValueError("Blaschke product zeros must lie inside the disk")
        if abs(abs(complex(self.rotation)) - 1.0) > 1e-12:
            raise ValueError("rotation must be unimodular")

    @property
    def degree(self) -> int:
        return len(self.zeros)

    def value_at_zero(self) -> complex:
        return self.rotation * math.prod(abs(z) for z in self.zeros)


def eval_blaschke(b: BlaschkeProduct, z):
    """Factor-by-factor evaluation; scalar or ndarray argument.

    Raises PoleProximityError if z comes within 2^-40 of a pole 1/conj(z_k).
    """
    zs = np.asarray(b.zeros.zeros, dtype=np.complex128)
    za = np.asarray(z, dtype=np.complex128)
    scalar = za.ndim == 0
    za = np.atleast_1d(za)
    out = np.full(za.shape, complex(b.rotation), dtype=np.complex128)
    rots = _factor_rotations(zs)
    for zk, rk in zip(zs, rots):
        if zk == 0:
            out *= za
            continue
        pole = 1.0 / np.conj(zk)
        if np.min(np.abs(za - pole)) < _POLE_TOL:
            raise PoleProximityError(f"evaluation within 2^-40 of pole {pole}")
        out *= rk * (za - zk) / (1.0 - np.conj(zk) * za)
    return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class DilatedCorrector:
    """The outer corrector for a zero set at dilation radius R.

    epsilon records k*(R-1) where k is the zero count; constructions coming
    from build_corrector keep it in (0, 1], constructions at an externally
    chosen radius may exceed that and the value is reporting-only there.
    """

    zeros: ZeroSet
    radius_R: float
    epsilon: float

    def __post_init__(self):
        if self.zeros.where != INSIDE_DISK:
            raise ValueError("corrector zeros must lie inside the disk")
        if len(self.zeros) == 0:
            raise ValueError("corrector requires a nonempty zero set")
        if not self.radius_R > 1.0:
            raise ValueError("dilation radius must exceed 1")

    @property
    def n(self) -> int:
        return len(self.zeros)

    def zero_array(self) -> np.ndarray:
        return np.asarray(self.zeros.zeros, dtype=np.complex128)

    def outer_margin(self) -> float:
        """min(|zero or pole of phi0|) - 1; positive certifies outerness."""
        moduli = [abs(z) for z in self.zeros.zeros if z != 0]
        if not moduli:
            return math.inf
        zmax = max(moduli)
        return 1.0 / zmax - 1.0  # zeros at 1/conj(z_k) are nearest


def build_corrector(zeros: ZeroSet, epsilon: float = 1.0) -> DilatedCorrector:
    """Corrector at the default radius R = 1 + epsilon/k, k the zero count."""
    if len(zeros) == 0:
        raise ValueError("corrector requires a nonempty zero set")
    if not (0.0 < epsilon <= 1.0):
        raise ValueError("epsilon must lie in (0, 1]")
    r = 1.0 + epsilon / len(zeros)
    return DilatedCorrector(zeros, r, epsilon)


def corrector_with_radius(zeros: ZeroSet, radius_R: float) -> DilatedCorrector:
    """Corrector at an externally prescribed radius (epsilon is derived)."""
    if len(zeros) == 0:
        raise ValueError("corrector requires a nonempty zero set")
    return DilatedCorrector(zeros, float(radius_R), len(zeros) * (radius_R - 1.0))


def eval_phi0(c: DilatedCorrector, z):
    """Direct product form of the corrector alone; scalar or ndarray."""
    zs = c.zero_array()
    za = np.asarray(z, dtype=np.complex128)
    scalar = za.ndim == 0
    za = np.atleast_1d(za)
    out = np.ones(za.shape, dtype=np.complex128)
    rr = c.radius_R * c.radius_R
    for zk in zs:
        if zk == 0:
            continue
        denom = 1.0 - (np.conj(zk) / rr) * za
        if np.min(np.abs(denom)) < _POLE_TOL:
            raise PoleProximityError("evaluation too close to a corrector pole")
        out *= (1.0 - np.conj(zk) * za) / denom
    return complex(out[0]) if scalar else out


def eval_B_phi(c: DilatedCorrector, z):
    """The combined product, evaluated in the dilated form R^n * Btilde(z/R).

    Valid for |z| < R^2; the factors of Btilde are unimodular on |z| = R,
    which keeps the evaluation free of cancellation between the Blaschke
    part and the corrector.
    """
    za = np.asarray(z, dtype=np.complex128)
    scalar = za.ndim == 0
    za = np.atleast_1d(za)
    rr = c.radius_R * c.radius_R
    if np.max(np.abs(za)) >= rr:
        raise ValueError(f"argument outside the analyticity disk |z| < {rr}")
    scaled = BlaschkeProduct(ZeroSet(tuple(zk / c.radius_R for zk in c.zeros)))
    out = (c.radius_R ** c.n) * eval_blaschke(scaled, za / c.radius_R)
    return complex(out[0]) if scalar else out


# ----------------------------------------------------------------------
# derivatives


def _log_derivative_sums(c: DilatedCorrector, z: np.ndarray):
    """(L1, L2, L3): first three z-derivatives of log(B phi0), summed over
    factors (z - z_k)/(1 - w_k z) with w_k = conj(z_k)/R^2."""
    zs = c.zero_array()
    w = np.conj(zs) / (c.radius_R * c.radius_R)
    l1 = np.zeros(z.shape, dtype=np.complex128)
    l2 = np.zeros(z.shape, dtype=np.complex128)
    l3 = np.zeros(z.shape, dtype=np.complex128)
    for zk, wk in zip(zs, w):
        a = 1.0 / (z - zk)
        l1 += a
        l2 -= a * a
        l3 += 2.0 * a * a * a
        if wk != 0:
            b = wk / (1.0 - wk * z)
            l1 += b
            l2 += b * b
            l3 += 2.0 * b * b * b
    return l1, l2, l3


class DerivSup(NamedTuple):
    value: float
    apriori: float


def _newton_circle_max(val_d1_d2, theta0: float, h: float, best: float) -> float:
    """Refine a grid maximum of |g(e^(i theta))| by Newton on |g|^2.

    val_d1_d2(theta) returns (g, dg/dtheta, d2g/dtheta2).  Steps are clamped
    to the grid spacing h; concave-up curvature stops the iteration.
    """
    theta = theta0
    for _ in range(3):
        g, g1, g2 = val_d1_d2(theta)
        q1 = 2.0 * (np.conj(g) * g1).real
        q2 = 2.0 * (abs(g1) ** 2 + (np.conj(g) * g2).real)
        if q2 >= 0.0:
            break
        step = -q1 / q2
        if abs(step) > h:
            step = math.copysign(h, step)
        theta += step
        g, _, _ = val_d1_d2(theta)
        best = max(best, abs(g))
    return best


def _unit_circle_sup_of_product(c: DilatedCorrector, order0: bool, m_grid: int) -> float:
    """sup over the unit circle of |B phi0| (order0) or |(B phi0)'|."""
    nodes = grid_nodes(m_grid)
    f = eval_B_phi(c, nodes)
    l1, l2, _ = _log_derivative_sums(c, nodes)
    target = np.abs(f) if order0 else np.abs(f * l1)
    k = int(np.argmax(target))
    best = float(target[k])
    h = 2.0 * np.pi / m_grid

    def at(theta: float):
        w = np.exp(1j * theta)
        wa = np.array([w])
        fv = eval_B_phi(c, wa)[0]
        s1, s2, s3 = (x[0] for x in _log_derivative_sums(c, wa))
        d1 = fv * s1
        d2 = fv * (s1 * s1 + s2)
        if order0:
            g, gz, gzz = fv, d1, d2
        else:
            d3 = fv * (s1 ** 3 + 3.0 * s1 * s2 + s3)
            g, gz, gzz = d1, d2, d3
        # theta-derivatives of g(e^(i theta))
        gt = gz * 1j * w
        gtt = -gzz * w * w - gz * w
        return g, gt, gtt

    return _newton_circle_max(at, 2.0 * np.pi * k / m_grid, h, best)


def derivative_sup(c: DilatedCorrector, order: int, oversample: int = 16) -> DerivSup:
    """Sup over the unit circle of the order-th derivative of B phi0.

    Order 1 uses the closed-form logarithmic derivative with grid search and
    Newton refinement.  Order >= 2 uses Cauchy-integral quadrature on the
    circle of radius r = (1+R)/2, evaluated at all boundary nodes at once by
    an FFT correlation.  The second member is the a-priori Cauchy bound
    order! * R^n * mean(r / |r e^(i t) - 1|^(order+1)), with the exact value
    r/(r^2 - 1) of the mean at order 1.
    """
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    n = c.n
    big_r = c.radius_R
    r = 0.5 * (1.0 + big_r)
    if order == 1:
        m = _next_pow2(max(64 * n, 4 * oversample * (n + 1), 512))
        value = _unit_circle_sup_of_product(c, order0=False, m_grid=m)
        apriori = (big_r ** n) * r / (r * r - 1.0)
        return DerivSup(value, apriori)
    # quadrature grid fine enough for the pole pair at distance r - 1
    m = _next_pow2(max(64 * n, 4 * oversample * (n + 1),
                       math.ceil(66.0 / (big_r - 1.0)), 1024))
    vals, i_m = _cauchy_derivative_values(c, order, m)
    fact = math.factorial(order)
    value = float(np.max(np.abs(vals)))
    apriori = fact * (big_r ** n) * i_m
    return DerivSup(value, apriori)


def _cauchy_derivative_values(c: DilatedCorrector, order: int, m: int):
    """Order-th derivative of B phi0 at all m unit-circle nodes, plus the
    quadrature value of mean(r/|r e^(i t) - 1|^(order+1)) on the same grid.

    Cauchy integral over |z| = r = (1+R)/2, discretized at the m-th roots of
    unity; the node coupling is a circular correlation, done by FFT.
    """
    r = 0.5 * (1.0 + c.radius_R)
    nodes = r * grid_nodes(m)
    g = eval_B_phi(c, nodes) * nodes
    h = (nodes - 1.0) ** (-(order + 1))
    corr = np.fft.ifft(np.fft.fft(g) * np.conj(np.fft.fft(np.conj(h))))
    phases = grid_nodes(m) ** (-(order + 1))
    vals = (math.factorial(order) / m) * phases * corr
    i_m = float(np.mean(r * np.abs(h)))
    return vals, i_m


# ----------------------------------------------------------------------
# Taylor coefficients


def _tail_envelope(c: DilatedCorrector) -> list[tuple[float, float]]:
    """Candidate (rho, sup bound on |B phi0| over |z| = rho) pairs.

    rho = R gives the exact sup R^n; larger rho up to the nearest pole gives
    faster geometric decay at the price of a larger constant.
    """
    n = c.n
    big_r = c.radius_R
    out = [(big_r, big_r ** n)]
    moduli = np.abs(c.zero_array())
    zmax = float(np.max(moduli))
    if zmax > 0.0:
        pole = big_r * big_r / zmax
        for t in (0.25, 0.5, 0.75):
            rho = big_r ** (1.0 - t) * pole ** t
            if rho <= big_r:
                continue
            # log-sum: the factor product overflows floats for many zeros
            log_bound = float(np.sum(
                np.log((rho + moduli) / (1.0 - moduli * rho / big_r ** 2))))
            bound = math.exp(log_bound) if log_bound < 700.0 else math.inf
            out.append((rho, bound))
    return out


def _alias_bound(c: DilatedCorrector, m: int) -> float:
    best = math.inf
    for rho, a in _tail_envelope(c):
        q = rho ** (-m)
        if q < 1.0:
            best = min(best, a * q / (1.0 - q))
    return best


def taylor_coeffs(c: DilatedCorrector, upto: int, tol: float = 1e-12) -> LaurentPolynomial:
    """Taylor coefficients of B phi0 on [0, upto] by sampled-circle DFT.

    The grid is doubled until the geometric aliasing bound (from circles
    between R and the nearest pole, all poles having modulus >= R^2) drops
    below tol; an unreachable tolerance raises TaylorToleranceError carrying
    the achieved bound.
    """
    if upto < 0:
        raise ValueError("upto must be >= 0")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    zs = c.zero_array()
    if np.all(zs == 0):
        # exact monomial z^n
        coeffs = np.zeros(upto + 1, dtype=np.complex128)
        if c.n <= upto:
            coeffs[c.n] = 1.0
        return LaurentPolynomial(0, coeffs)
    m = _next_pow2(max(2 * (upto + 1), 64 * c.n, 256))
    cap = 1 << 22
    while _alias_bound(c, m) > tol:
        if m >= cap:
            raise TaylorToleranceError(_alias_bound(c, m), tol)
        m <<= 1
    vals = eval_B_phi(c, grid_nodes(m))
    coeffs = np.fft.fft(vals)[: upto + 1] / m
    return LaurentPolynomial(0, coeffs)


def _truncation_degree(c: DilatedCorrector, s_max: int, tol: float) -> int:
    """Smallest degree D with (2D)^s_max * tail-sup beyond D below tol."""
    def ok(d: int) -> bool:
        best = math.inf
        for rho, a in _tail_envelope(c):
            best = min(best, a * rho ** (-d) * rho / (rho - 1.0))
        return best * float(2 * d) ** s_max <= tol

    lo = c.n + 1
    hi = lo
    while not ok(hi):
        hi *= 2
        if hi > (1 << 26):
            raise TaylorToleranceError(math.nan, tol)
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return hi


def corrector_certificate(c: DilatedCorrector, s_list: Sequence[int] = (1, 2),
                          oversample: int = 16) -> dict:
    """Per-instance certificate record.

    Keys: n, epsilon, sup_phi (sup of |phi0| on the circle, equal to the sup
    of |B phi0| there), phi0_err = |phi0(0) - 1|, and for each s in s_list
    the pair ratio_s{s} = derivative_sup(s)/n^s and besov_ratio_s{s} =
    besov_seminorm(Taylor truncation, s, inf)/n^s, plus deriv_apriori_s{s}.
    """
    n = c.n
    m = _next_pow2(max(64 * n, 4 * oversample * (n + 1), 512))
    sup_phi = _unit_circle_sup_of_product(c, order0=True, m_grid=m)
    record = {
        "n": n,
        "epsilon": c.epsilon,
        "sup_phi": sup_phi,
        "phi0_err": abs(eval_phi0(c, 0.0) - 1.0),
    }
    for s in s_list:
        ds = derivative_sup(c, s, oversample)
        record[f"ratio_s{s}"] = ds.value / float(n) ** s
        record[f"deriv_apriori_s{s}"] = ds.apriori
    if s_list:
        s_max = max(s_list)
        zs = c.zero_array()
        if np.all(zs == 0):
            trunc = LaurentPolynomial(n, [1.0])
        else:
            d = _truncation_degree(c, s_max, 1e-9)
            trunc = taylor_coeffs(c, d, tol=1e-10)
        for s in s_list:
            record[f"besov_ratio_s{s}"] = besov_seminorm(trunc, s, np.inf) / float(n) ** s
    return record

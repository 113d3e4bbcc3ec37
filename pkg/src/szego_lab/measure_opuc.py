"""Orthogonal systems for a circle measure with point masses outside.

The measure is dm/|psi|^2 on the unit circle plus finitely many point masses
at |z_k| > 1, psi a zero-free-on-the-closed-disk Taylor polynomial with
psi(0) > 0.  This module computes trigonometric moments (cached, grid
quadrature with doubling), Gram matrices over polynomial and Laurent spans,
the leading coefficients of the orthonormal elements through the
extended-precision Schur route, the orthonormal elements themselves, a
contour-integral residue identity connecting the Laurent leading coefficient
to point evaluations at the masses, and the slow-decay condition report for
mass sequences accumulating at the circle.

Precision escalation is explicit: a Gram factorization that fails at the
measure's tag is retried at the next tag and the failure is reported, never
hidden.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from mpmath import mp

from szego_lab.blaschke import BlaschkeProduct, ZeroSet
from szego_lab.circle_fourier import LaurentPolynomial, _next_pow2
from szego_lab.xlinalg import (
    PRECISION_BITS,
    HermitianMatrix,
    NotPositiveDefinite,
    PrecisionTag,
    _MP_LOCK,
    constrained_max_leading,
    next_tag,
    schur_leading,
)

__all__ = [
    "OuterWeight",
    "PointSpectrum",
    "MeasureSpec",
    "ReflectedBlaschke",
    "QuadratureError",
    "PrecisionExhausted",
    "moment",
    "gram_polynomial",
    "gram_laurent",
    "tau_n",
    "eta_n",
    "orthonormal_element",
    "target_limit",
    "residue_identity_check",
    "log_condition_report",
]


class QuadratureError(ArithmeticError):
    """Grid quadrature failed to converge before the node cap."""


class PrecisionExhausted(ArithmeticError):
    """Factorization failed at every precision tag; carries the report."""

    def __init__(self, bits_tried: tuple, last_pivot: int):
        self.bits_tried = bits_tried
        self.last_pivot = last_pivot
        super().__init__(
            f"not positive definite at any of {bits_tried} bits "
            f"(last failing pivot {last_pivot})")


@dataclass(frozen=True)
class OuterWeight:
    """Zero-free Taylor polynomial weight with positive value at the origin.

    Zero-freeness on the closed disk is verified through the polynomial
    roots; the minimum of |psi| over a 4096-node circle grid is recorded as
    delta_floor.
    """

    psi: LaurentPolynomial
    label: str = ""
    delta_floor: float = field(init=False)

    def __post_init__(self):
        p = self.psi.as_complex128()
        if p.lo < 0:
            raise ValueError("weight must have nonnegative exponents only")
        c0 = complex(p.coefficient(0))
        if c0.imag != 0.0 or c0.real <= 0.0:
            raise ValueError("psi(0) must be real and positive")
        if p.hi >= 1:
            roots = np.roots(p.coeffs[::-1])
            if np.any(np.abs(roots) <= 1.0):
                raise ValueError("psi must be zero-free on the closed unit disk")
        nodes = np.exp(2j * np.pi * np.arange(4096) / 4096)
        floor = float(np.min(np.abs(p(nodes))))
        if floor <= 0.0:
            raise ValueError("psi vanishes on the sampling grid")
        object.__setattr__(self, "delta_floor", floor)

    @property
    def psi0(self) -> float:
        return float(self.psi.coefficient(0).real)

    def coeff_key(self) -> tuple:
        return tuple(complex(c) for c in self.psi.as_complex128().coeffs)

    @classmethod
    def constant_one(cls) -> "OuterWeight":
        return cls(LaurentPolynomial(0, [1.0]))


@dataclass(frozen=True)
class PointSpectrum:
    """Point masses (z_k, mu_k) with |z_k| > 1 and mu_k > 0."""

    masses: tuple

    def __post_init__(self):
        ms = tuple((complex(z), float(m)) for z, m in self.masses)
        object.__setattr__(self, "masses", ms)
        for z, m in ms:
            if abs(z) <= 1.0:
                raise ValueError(f"mass point {z} not outside the circle")
            if m <= 0.0:
                raise ValueError(f"mass weight {m} not positive")

    def __len__(self) -> int:
        return len(self.masses)

    @property
    def blaschke_sum(self) -> float:
        return float(sum(abs(z) - 1.0 for z, _ in self.masses))

    @property
    def total_mass(self) -> float:
        return float(sum(m for _, m in self.masses))

    @classmethod
    def empty(cls) -> "PointSpectrum":
        return cls(())


@dataclass(frozen=True)
class MeasureSpec:
    weight: OuterWeight
    spectrum: PointSpectrum
    precision: int = 256

    def __post_init__(self):
        PrecisionTag(self.precision)

    def to_json(self) -> dict:
        p = self.weight.psi.as_complex128()
        psi = [[float(c.real), float(c.imag)] for c in p.coeffs]
        masses = [[z.real, z.imag, m] for z, m in self.spectrum.masses]
        return {"psi": psi, "masses": masses, "precision_bits": self.precision}

    @classmethod
    def from_json(cls, obj: dict) -> "MeasureSpec":
        psi = LaurentPolynomial(0, [complex(re, im) for re, im in obj["psi"]])
        masses = tuple((complex(re, im), float(m)) for re, im, m in obj.get("masses", []))
        return cls(OuterWeight(psi), PointSpectrum(masses),
                   int(obj.get("precision_bits", 256)))


@dataclass(frozen=True)
class ReflectedBlaschke:
    """Blaschke product on the disk-reflected mass points 1/conj(z_k)."""

    product: BlaschkeProduct

    @classmethod
    def from_spectrum(cls, spectrum: PointSpectrum, count: int | None = None) -> "ReflectedBlaschke":
        pts = spectrum.masses if count is None else spectrum.masses[:count]
        zetas = tuple(1.0 / z.conjugate() for z, _ in pts)
        return cls(BlaschkeProduct(ZeroSet(zetas)))

    def value_at_zero(self) -> float:
        return float(self.product.value_at_zero().real)


def target_limit(mu: MeasureSpec) -> float:
    """The common limit of the leading coefficients: B(0) * psi(0)."""
    b0 = math.prod(1.0 / abs(z) for z, _ in mu.spectrum.masses)
    return b0 * mu.weight.psi0


# ----------------------------------------------------------------------
# trigonometric moments of the absolutely continuous part

_GRID_CAP = 1 << 20


class _MomentTable:
    __slots__ = ("values", "grid")

    def __init__(self, values: list, grid: int):
        self.values = values  # t_m for m = 0..len-1
        self.grid = grid


_moment_cache: dict = {}


def _psi_mp(weight: OuterWeight, bits: int) -> list:
    with mp.workprec(bits):
        return [mp.mpc(complex(c)) for c in weight.psi.as_complex128().coeffs]


def _eval_poly_mp(coeffs: list, z):
    acc = coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def _trig_table_at(weight: OuterWeight, m_max: int, grid: int, bits: int,
                   values_cache: dict) -> list:
    """DFT of 1/|psi|^2 on a fixed power-of-two grid, orders 0..m_max."""
    coeffs = _psi_mp(weight, bits)
    if grid not in values_cache:
        two_over = mp.mpf(2) / grid
        vals = []
        for p in range(grid):
            x = mp.expjpi(two_over * p)
            w = _eval_poly_mp(coeffs, x)
            vals.append(1 / (w * mp.conj(w)))
        values_cache[grid] = vals
    vals = values_cache[grid]
    roots = [mp.expjpi(mp.mpf(2 * q) / grid) for q in range(grid)]
    out = []
    for m in range(m_max + 1):
        terms = (vals[p] * roots[(-m * p) % grid] for p in range(grid))
        out.append(mp.fsum(terms) / grid)
    return out


def _trig_moments(weight: OuterWeight, m_max: int, bits: int) -> _MomentTable:
    """t_m = circle mean of e^(i m t)/|psi|^2 for m = 0..m_max, cached.

    The grid doubles until two successive grids agree to 2^(6-bits) relative
    to t_0; the cap at 2^20 nodes raises QuadratureError.
    """
    key = (weight.coeff_key(), bits)
    with _MP_LOCK:
        tab = _moment_cache.get(key)
        if tab is not None and len(tab.values) > m_max:
            return tab
        with mp.workprec(bits + 32):
            tol = mp.mpf(2) ** (6 - bits)
            grid = _next_pow2(max(2 * m_max + 2,
                                  8 * (len(weight.psi.coeffs) + 1), 256))
            if tab is not None:
                grid = max(grid, tab.grid // 2)
            values_cache: dict = {}
            prev = _trig_table_at(weight, m_max, grid, bits, values_cache)
            while True:
                if 2 * grid > _GRID_CAP:
                    raise QuadratureError(
                        f"moment quadrature did not converge by {_GRID_CAP} nodes")
                cur = _trig_table_at(weight, m_max, 2 * grid, bits, values_cache)
                scale = abs(cur[0])
                worst = max(abs(a - b) for a, b in zip(prev, cur))
                if worst <= tol * scale:
                    tab = _MomentTable(cur, 2 * grid)
                    _moment_cache[key] = tab
                    return tab
                prev = cur
                grid *= 2


def _trig_moment(weight: OuterWeight, m: int, bits: int):
    tab = _trig_moments(weight, abs(m), bits)
    t = tab.values[abs(m)]
    return mp.conj(t) if m < 0 else t


def moment(mu: MeasureSpec, j: int, k: int):
    """The L2(mu) inner product of z^j against z^k, as an mpc.

    Absolutely continuous part: the trigonometric moment of order j-k of
    1/|psi|^2.  Point part: sum of mu_l * z_l^j * conj(z_l)^k.
    """
    bits = mu.precision
    with _MP_LOCK, mp.workprec(bits):
        total = mp.mpc(_trig_moment(mu.weight, j - k, bits))
        for z, m in mu.spectrum.masses:
            zl = mp.mpc(z)
            total += m * zl ** j * mp.conj(zl) ** k
        return total


def _gram_from_exponents(mu: MeasureSpec, exps: Sequence[int], bits: int) -> HermitianMatrix:
    n = len(exps)
    lo, hi = min(exps), max(exps)
    table = _trig_moments(mu.weight, hi - lo, bits)
    with _MP_LOCK, mp.workprec(bits):
        powers = []
        for z, m in mu.spectrum.masses:
            zl = mp.mpc(z)
            pw = {0: mp.mpc(1)}
            for e in range(1, hi + 1):
                pw[e] = pw[e - 1] * zl
            inv = 1 / zl
            for e in range(-1, lo - 1, -1):
                pw[e] = pw[e + 1] * inv
            powers.append((mp.mpf(m), pw))
        cols: list[list] = [[None] * n for _ in range(n)]
        for c in range(n):
            for r in range(c, n):
                d = exps[c] - exps[r]
                t = table.values[abs(d)]
                val = mp.conj(t) if d < 0 else mp.mpc(t)
                for m, pw in powers:
                    val += m * pw[exps[c]] * mp.conj(pw[exps[r]])
                cols[c][r] = val
                if r != c:
                    cols[r][c] = mp.conj(val)
        return HermitianMatrix(cols, bits)


def gram_polynomial(mu: MeasureSpec, n: int, bits: int | None = None) -> HermitianMatrix:
    """Gram matrix of {1, z, ..., z^n}; the pivot z^n sits last."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return _gram_from_exponents(mu, range(n + 1), bits or mu.precision)


def gram_laurent(mu: MeasureSpec, n: int, bits: int | None = None) -> HermitianMatrix:
    """Gram matrix of {z^-(n-1), ..., z^n}; the pivot z^n sits last."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _gram_from_exponents(mu, range(-(n - 1), n + 1), bits or mu.precision)


def _escalate(mu: MeasureSpec, build_and_solve):
    """Run build_and_solve(bits) under the explicit escalation protocol."""
    tried = []
    bits = mu.precision
    last = None
    while bits is not None:
        tried.append(bits)
        try:
            return build_and_solve(bits)
        except NotPositiveDefinite as err:
            last = err
            bits = next_tag(bits)
    raise PrecisionExhausted(tuple(tried), last.pivot)


def tau_n(mu: MeasureSpec, n: int):
    """Leading coefficient of the degree-n orthonormal polynomial (mpf)."""
    return _escalate(mu, lambda b: schur_leading(gram_polynomial(mu, n, b)))


def eta_n(mu: MeasureSpec, n: int):
    """Leading coefficient of the orthonormal Laurent element (mpf)."""
    return _escalate(mu, lambda b: schur_leading(gram_laurent(mu, n, b)))


def orthonormal_element(mu: MeasureSpec, n: int, laurent: bool = False) -> LaurentPolynomial:
    """The orthonormal element itself, coefficients at working precision.

    Obtained as the witness of the constrained extremal problem, so the z^n
    coefficient is real positive and equals tau_n (or eta_n).
    """
    lo = -(n - 1) if laurent else 0
    if laurent and n < 1:
        raise ValueError("laurent elements need n >= 1")

    def solve(bits):
        g = _gram_from_exponents(mu, range(lo, n + 1), bits)
        _, wit = constrained_max_leading(g)
        arr = np.empty(len(wit), dtype=object)
        arr[:] = wit
        return LaurentPolynomial(lo, arr, precision=bits)

    return _escalate(mu, solve)


# ----------------------------------------------------------------------
# residue identity


def _reflected_factors(masses: Sequence) -> list:
    """(zeta_i, rot_i) for the positively normalized reflected product."""
    out = []
    for z, _ in masses:
        zeta = 1 / mp.conj(mp.mpc(z))
        out.append((zeta, -abs(zeta) / zeta))
    return out


def _blaschke_mp(factors: list, x):
    acc = mp.mpc(1)
    for zeta, rot in factors:
        acc *= rot * (x - zeta) / (1 - mp.conj(zeta) * x)
    return acc


def residue_identity_check(mu: MeasureSpec, n: int, k: int) -> dict:
    """Contour-integral identity for the Laurent element R_n and the first k
    masses.

    LHS: circle mean of R_n(x) x^(-n) / (conj(psi(x)) conj(B^k(x))), the
    quadrature of the contour integral of R_n/(psi_* z^(n+1) B^k_*).
    RHS: eta_n/(B^k(0) psi(0)) minus the residue sum at the first k mass
    points.  Returns both sides, their gap, and the Cauchy-Schwarz majorant
    of the residue sum.
    """
    if not 0 <= k <= len(mu.spectrum):
        raise ValueError("k must be between 0 and the number of masses")
    pts = mu.spectrum.masses[:k]
    for i in range(k):
        for j in range(i + 1, k):
            if pts[i][0] == pts[j][0]:
                raise ValueError("chosen mass points must be distinct")
    bits = mu.precision
    r_elem = orthonormal_element(mu, n, laurent=True)
    with _MP_LOCK, mp.workprec(bits):
        psi_coeffs = _psi_mp(mu.weight, bits)
        factors = _reflected_factors(pts)
        eta = mp.re(r_elem.coefficient(n))
        coeffs = list(r_elem.coeffs)

        def r_at(x):
            acc = coeffs[-1]
            for c in coeffs[-2::-1]:
                acc = acc * x + c
            return acc * x ** r_elem.lo

        # closed-form side
        b0 = mp.mpf(1)
        for zeta, _ in factors:
            b0 *= abs(zeta)
        rhs = eta / (b0 * mp.mpf(mu.weight.psi0))
        majorant = mp.mpf(0)
        for i, (z, mass) in enumerate(pts):
            zi = mp.mpc(z)
            zeta_i, rot_i = factors[i]
            deriv = mp.conj(rot_i) * (-mp.conj(zeta_i) ** 2 / (1 - abs(zeta_i) ** 2))
            for j, (zeta_j, rot_j) in enumerate(factors):
                if j != i:
                    deriv *= mp.conj(rot_j) * (1 - mp.conj(zeta_j) * zi) / (zi - zeta_j)
            if deriv == 0:
                raise ValueError("degenerate double point in the reflected product")
            psi_star = mp.conj(_eval_poly_mp(psi_coeffs, zeta_i))
            denom = deriv * psi_star * zi ** (n + 1)
            rhs -= r_at(zi) / denom
            majorant += 1 / (abs(denom) ** 2 * mass)

        # quadrature side
        def mean_at(grid: int):
            two_over = mp.mpf(2) / grid
            terms = []
            for p in range(grid):
                x = mp.expjpi(two_over * p)
                num = r_at(x) * x ** (-n)
                den = mp.conj(_eval_poly_mp(psi_coeffs, x)) * mp.conj(_blaschke_mp(factors, x))
                terms.append(num / den)
            return mp.fsum(terms) / grid

        tol = mp.mpf(2) ** (-min(bits, 160) + 20)
        grid = _next_pow2(max(8 * (n + 1), 256))
        prev = mean_at(grid)
        while True:
            if 2 * grid > _GRID_CAP:
                raise QuadratureError(
                    f"residue quadrature did not converge by {_GRID_CAP} nodes")
            cur = mean_at(2 * grid)
            if abs(cur - prev) <= tol:
                break
            prev = cur
            grid *= 2
        lhs = cur
        return {
            "n": n,
            "k": k,
            "lhs": lhs,
            "rhs": rhs,
            "abs_diff": abs(lhs - rhs),
            "schwarz_majorant": majorant,
            "grid": 2 * grid,
        }


# ----------------------------------------------------------------------
# slow-decay condition report


def log_condition_report(spectrum: PointSpectrum, a_list: Sequence[float],
                         n_max: int) -> dict:
    """(log n)^A-weighted near-circle mass tails over a log-spaced n grid.

    For each A, reports (log n)^A * sum of mu_k over 1 < |z_k| < 1 + 1/n and
    whether the sequence stays bounded across the tested range (no growth
    from the first half of the grid to the second beyond a factor 2).
    """
    if not a_list:
        raise ValueError("need at least one exponent A")
    ns = []
    n = 2
    while n < n_max:
        ns.append(n)
        n *= 2
    ns.append(n_max)
    tails = []
    for n in ns:
        cut = 1.0 + 1.0 / n
        tails.append(sum(m for z, m in spectrum.masses if 1.0 < abs(z) < cut))
    per_a = {}
    for a in a_list:
        vals = [math.log(n) ** a * t for n, t in zip(ns, tails)]
        half = len(vals) // 2
        first = max(vals[: half + 1]) if vals else 0.0
        second = max(vals[half:]) if vals else 0.0
        bounded = second <= 2.0 * first + 1e-12
        per_a[a] = {"values": vals, "bounded": bounded}
    return {"n_values": ns, "tail_sums": tails, "per_A": per_a}

"""Lower-bound pipelines for the Laurent and polynomial leading coefficients.

The measure's point masses are reflected into the disk and the few that sit
well inside (a slowly growing selection cap keeps their count small) get
the dilated outer corrector.  The combined product is then approximated on
the circle by a trigonometric polynomial in one of two ways: a kernel
convolution whose multiplier is flat through order n, or the plain degree-n
Taylor truncation.  Either approximant, divided by z^n and conjugate
reflected, is an admissible competitor for the extremal problem defining
the leading coefficient, so its normalized top coefficient is a certified
lower bound.  Every run emits a PipelineCertificate with the measured
defect, a norm decomposition over the circle part, the selected masses and
the tail masses, and interior-point Schwarz checks.

For a nonconstant weight the approximated function is the product divided
by the weight, with the reciprocal expanded as a truncated Taylor series;
the truncation tail is recorded in the certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from mpmath import mp

from szego_lab.blaschke import (
    BlaschkeProduct,
    DilatedCorrector,
    ZeroSet,
    corrector_with_radius,
    eval_B_phi,
)
from szego_lab.circle_fourier import (
    KernelSpec,
    LaurentPolynomial,
    _next_pow2,
    convolve,
    dirichlet,
    modified_vp,
)
from szego_lab.measure_opuc import (
    MeasureSpec,
    OuterWeight,
    PointSpectrum,
    ReflectedBlaschke,
    _trig_moments,
    log_condition_report,
    target_limit,
    tau_n,
    eta_n,
)
from szego_lab.xlinalg import _MP_LOCK

__all__ = [
    "SCHEDULE_FAMILIES",
    "ScheduleFn",
    "ScheduleParams",
    "ScheduleViolation",
    "LogConditionFailed",
    "PipelineCertificate",
    "validate_schedule",
    "partial_product",
    "vp_approximant",
    "taylor_approximant",
    "convergence_experiment",
]


class ScheduleViolation(ValueError):
    """A schedule parameter failed its slow-growth requirements."""


class LogConditionFailed(ArithmeticError):
    """The mass tails near the circle decay too slowly for the Taylor route."""


# ----------------------------------------------------------------------
# schedules

# Unshifted iterated logarithms: defined for n >= 4 and, with the default
# pairing below, the decay sequence log(n) * exp(-1/(A*eps)) collapses to
# 1/log(n), which is strictly decreasing on the whole pipeline domain.
SCHEDULE_FAMILIES: dict[str, Callable[[float], float]] = {
    "inv_loglog_sq": lambda n: 1.0 / math.log(math.log(n)) ** 2,
    "half_loglog": lambda n: 0.5 * math.log(math.log(n)),
    "constant": lambda n: 1.0,
}


@dataclass(frozen=True)
class ScheduleFn:
    """A named slowly varying function of n, scaled by a positive factor."""

    family: str
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in SCHEDULE_FAMILIES:
            raise ValueError(f"unknown schedule family {self.family!r}")
        if not self.scale > 0:
            raise ValueError("schedule scale must be positive")

    def __call__(self, n: int) -> float:
        return self.scale * SCHEDULE_FAMILIES[self.family](n)

    def to_json(self) -> dict:
        return {"family": self.family, "scale": self.scale}

    @classmethod
    def from_json(cls, obj: dict) -> "ScheduleFn":
        return cls(obj["family"], float(obj.get("scale", 1.0)))


@dataclass(frozen=True)
class ScheduleParams:
    """Pipeline schedule: the shrink rate, the slow-growth factor, and the
    working constant of the tail majorants.

    c_bound None means: derive the constant from the measure at run time as
    twice the reflected Blaschke sum.
    """

    eps_fn: ScheduleFn
    a_fn: ScheduleFn
    c_bound: float | None = None

    def __post_init__(self):
        if self.c_bound is not None and not self.c_bound > 0:
            raise ValueError("c_bound must be positive when given")

    def eps(self, n: int) -> float:
        return self.eps_fn(n)

    def a(self, n: int) -> float:
        return self.a_fn(n)

    def decay(self, n: int) -> float:
        """log n scaled by the exponentially small factor exp(-1/(A*eps))."""
        return math.log(n) * math.exp(-1.0 / (self.a(n) * self.eps(n)))

    @classmethod
    def default(cls) -> "ScheduleParams":
        return cls(ScheduleFn("inv_loglog_sq"), ScheduleFn("half_loglog"))

    def to_json(self) -> dict:
        return {"eps": self.eps_fn.to_json(), "a": self.a_fn.to_json(),
                "c_bound": self.c_bound}

    @classmethod
    def from_json(cls, obj: dict) -> "ScheduleParams":
        c = obj.get("c_bound")
        return cls(ScheduleFn.from_json(obj["eps"]), ScheduleFn.from_json(obj["a"]),
                   None if c is None else float(c))


def validate_schedule(sched: ScheduleParams, ns: Sequence[int]) -> None:
    """Check the slow-growth requirements numerically over the given grid.

    Requires the growth factor to increase, its product with the shrink
    rate to decrease, and the decay sequence to decrease.
    """
    ns = sorted(set(int(n) for n in ns))
    if len(ns) < 2:
        raise ValueError("schedule validation needs at least two grid points")
    if ns[0] < 4:
        raise ValueError("schedule grid points must be at least 4")
    a_vals = [sched.a(n) for n in ns]
    prod = [sched.a(n) * sched.eps(n) for n in ns]
    dec = [sched.decay(n) for n in ns]
    for i in range(len(ns) - 1):
        if not a_vals[i + 1] > a_vals[i] - 1e-15:
            raise ScheduleViolation(
                f"growth factor {sched.a_fn.family} not increasing "
                f"between n={ns[i]} and n={ns[i + 1]}")
        if not prod[i + 1] < prod[i] + 1e-15:
            raise ScheduleViolation(
                f"product of {sched.a_fn.family} and {sched.eps_fn.family} "
                f"not decreasing between n={ns[i]} and n={ns[i + 1]}")
        if dec[i + 1] > dec[i] + 1e-15:
            raise ScheduleViolation(
                f"decay sequence of {sched.eps_fn.family}/{sched.a_fn.family} "
                f"not decreasing between n={ns[i]} and n={ns[i + 1]}")


# ----------------------------------------------------------------------
# partial products and corrector series


def _reflected_pairs(spectrum: PointSpectrum) -> list:
    return [(1.0 / z.conjugate(), m) for z, m in spectrum.masses]


def _select(spectrum: PointSpectrum, cap: int) -> tuple[list, list]:
    """Split the mass points into the selected few and the near-circle tail.

    Selection looks at the reflected moduli: below 1 - 1/cap, smallest
    first, at most cap of them.  Returns original (point, mass) pairs.
    """
    masses = list(spectrum.masses)
    refl = [1.0 / abs(z) for z, _ in masses]
    order = sorted(range(len(masses)), key=lambda i: refl[i])
    threshold = 1.0 - 1.0 / cap
    chosen = [i for i in order if refl[i] < threshold][:cap]
    chosen_set = set(chosen)
    selected = [masses[i] for i in chosen]
    tail = [masses[i] for i in range(len(masses)) if i not in chosen_set]
    return selected, tail


def partial_product(spectrum: PointSpectrum, n: int, sched: ScheduleParams):
    """Selection cap, dilation numbers, and the partial reflected product.

    Returns (product, cap, margin_reciprocal, radius) where radius
    = 1 + 1/margin_reciprocal.
    """
    if n < 8:
        raise ValueError("pipelines need n >= 8")
    a, eps = sched.a(n), sched.eps(n)
    cap = math.floor(a * eps * n)
    if cap < 1:
        raise ScheduleViolation(
            f"schedule {sched.eps_fn.family}/{sched.a_fn.family} "
            f"gives an empty selection cap at n={n}")
    margin = math.ceil(a * cap)
    radius = 1.0 + 1.0 / margin
    selected, _ = _select(spectrum, cap)
    product = ReflectedBlaschke(BlaschkeProduct(ZeroSet(
        tuple(1.0 / z.conjugate() for z, _ in selected))))
    return product, cap, margin, radius


def _bphi_series(zetas: Sequence, radius: float, upto: int,
                 bits: int = 128) -> np.ndarray:
    """Taylor coefficients of the dilated product, exact factor recurrences.

    Works in the rescaled variable w = z/R where every factor is a plain
    Blaschke factor with zero a = zeta/R; multiplying by (w - a) is a shift
    and subtract, dividing by (1 - conj(a) w) is a running recurrence.  The
    coefficient of z^j then picks up R^(count - j).

    Runs at the given precision; the values at a reflected point carry the
    back-reflection factor |zeta|^(-n), so the coefficients need roughly
    n*log2(1/|zeta|) bits beyond the target accuracy.  Object array out.
    """
    with _MP_LOCK, mp.workprec(bits):
        rr = mp.mpf(radius)
        scaled = [mp.mpc(zt) / rr for zt in zetas]
        c = [mp.mpc(0)] * (upto + 1)
        c[0] = mp.mpc(1)
        for a in scaled:
            rot = -abs(a) / a if a != 0 else mp.mpc(1)
            nxt = [mp.mpc(0)] * (upto + 1)
            nxt[0] = -a * c[0] * rot
            for j in range(1, upto + 1):
                nxt[j] = (c[j - 1] - a * c[j]) * rot
            w = mp.conj(a)
            if w != 0:
                for j in range(1, upto + 1):
                    nxt[j] = nxt[j] + w * nxt[j - 1]
            c = nxt
        count = len(scaled)
        out = [c[j] * rr ** (count - j) for j in range(upto + 1)]
    return np.array(out, dtype=object)


def _inverse_weight(weight: OuterWeight, tail_target: float = 1e-12,
                    cap: int = 4096, bits: int = 128) -> tuple[np.ndarray, float]:
    """Truncated Taylor series of the reciprocal weight and its tail bound.

    The tail bound comes from coefficient decay at a circle halfway to the
    nearest root of the weight.  Coefficients come out at the requested
    precision (object array) so downstream products stay cancellation-safe.
    """
    p = weight.psi.as_complex128()
    with _MP_LOCK, mp.workprec(bits):
        if p.hi == 0:
            inv0 = 1 / mp.mpc(complex(p.coefficient(0)))
            return np.array([inv0], dtype=object), 0.0
        roots = np.roots(p.coeffs[::-1])
        rho = (1.0 + float(np.min(np.abs(roots)))) / 2.0
        nodes = rho * np.exp(2j * np.pi * np.arange(4096) / 4096)
        m_rho = float(np.max(1.0 / np.abs(p(nodes))))

        def tail(d: int) -> float:
            return m_rho * rho ** (-(d + 1)) / (1.0 - 1.0 / rho)

        degree = 1
        while tail(degree) > tail_target and degree < cap:
            degree *= 2
        degree = min(degree, cap)
        psi = [mp.mpc(complex(c)) for c in p.coeffs]
        inv = [mp.mpc(0)] * (degree + 1)
        inv[0] = 1 / psi[0]
        for j in range(1, degree + 1):
            acc = mp.mpc(0)
            for i in range(1, min(j, p.hi) + 1):
                acc += psi[i] * inv[j - i]
            inv[j] = -acc / psi[0]
    return np.array(inv, dtype=object), tail(degree)


def _target_values(corrector: DilatedCorrector | None,
                   inv_poly: LaurentPolynomial, pts: np.ndarray) -> np.ndarray:
    base = eval_B_phi(corrector, pts) if corrector is not None else 1.0
    return base * inv_poly(pts)


def _defect_sup(approx: LaurentPolynomial, corrector, inv_poly,
                start_grid: int) -> float:
    """Sampled sup of approximant minus target on the circle.

    Doubles the grid until the running max stabilizes to 0.1% (or 2^16
    nodes), then refines the peak with one parabolic step.
    """
    grid = start_grid
    prev = None
    while True:
        theta = 2.0 * np.pi * np.arange(grid) / grid
        nodes = np.exp(1j * theta)
        diff = np.abs(approx(nodes) - _target_values(corrector, inv_poly, nodes))
        if np.ndim(diff) == 0:
            # constant approximant against constant target
            return float(diff)
        cur = float(np.max(diff))
        if (prev is not None and abs(cur - prev) <= 1e-3 * max(cur, 1e-300)) \
                or grid >= (1 << 16):
            break
        prev = cur
        grid *= 2
    p = int(np.argmax(diff))
    h = 2.0 * np.pi / grid
    ym, y0, yp = diff[(p - 1) % grid], diff[p], diff[(p + 1) % grid]
    denom = ym - 2.0 * y0 + yp
    if denom < 0:
        shift = 0.5 * h * (ym - yp) / denom
        shift = float(np.clip(shift, -h, h))
        node = np.exp(1j * (theta[p] + shift))
        refined = abs(complex(approx(node))
                      - complex(_target_values(corrector, inv_poly,
                                               np.array([node]))[0]))
        cur = max(cur, refined)
    return cur


# ----------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class PipelineCertificate:
    """Per-run record of every quantity the lower-bound argument uses."""

    route: str
    n: int
    selection_cap: int
    margin_reciprocal: int
    radius: float
    selected_count: int
    sup_defect: float
    apriori_defect: float
    schedule_decay: float
    inverse_tail: float
    leading_gap: float
    ac_norm: float
    inside_mass_sum: float
    tail_mass_sum: float
    tail_majorant: float
    total_norm: float
    lower_bound_achieved: float
    schwarz_excess: float
    schwarz_pass: bool

    FIELDS = ("route", "n", "selection_cap", "margin_reciprocal", "radius",
              "selected_count", "sup_defect", "apriori_defect",
              "schedule_decay", "inverse_tail", "leading_gap", "ac_norm",
              "inside_mass_sum", "tail_mass_sum", "tail_majorant",
              "total_norm", "lower_bound_achieved", "schwarz_excess",
              "schwarz_pass")

    def to_row(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}

    @property
    def bookkeeping_gap(self) -> float:
        """Relative gap of total_norm^2 against its three-part split."""
        pieces = self.ac_norm + self.inside_mass_sum + self.tail_mass_sum
        return abs(self.total_norm ** 2 - pieces) / self.total_norm ** 2


def _to_mp(c):
    if isinstance(c, (mp.mpc, mp.mpf)):
        return c
    return mp.mpc(complex(c))


def _norm_pieces(weight: OuterWeight, spectrum: PointSpectrum,
                 competitor: LaurentPolynomial, r_small: LaurentPolynomial,
                 selected: list, tail: list, bits: int):
    """Norm bookkeeping in extended precision.

    The circle part and the mass part of the competitor's squared norm are
    evaluated at the mass points themselves; the inside/tail split is
    evaluated independently at the reflected points through the
    un-inverted function.  Reflecting the mass points here, at working
    precision, makes both evaluations see the same point exactly; their
    agreement then certifies the reflection step rather than the rounding
    of the points.
    """
    with _MP_LOCK, mp.workprec(bits):
        exps = list(range(competitor.lo, competitor.hi + 1))
        span = competitor.hi - competitor.lo
        table = _trig_moments(weight, span, bits)
        v = [_to_mp(c) for c in competitor.coeffs]

        def t_at(d: int):
            t = table.values[abs(d)]
            return mp.conj(t) if d < 0 else t

        ac = mp.re(mp.fsum(
            mp.conj(v[r]) * mp.fsum(v[c] * t_at(exps[c] - exps[r])
                                    for c in range(len(v)))
            for r in range(len(v))))

        def poly_at(poly: LaurentPolynomial, x):
            acc = _to_mp(poly.coeffs[-1])
            for cf in poly.coeffs[-2::-1]:
                acc = acc * x + _to_mp(cf)
            return acc * x ** poly.lo

        mass_part = mp.mpf(0)
        for z, m in spectrum.masses:
            mass_part += m * abs(poly_at(competitor, mp.mpc(z))) ** 2
        total_sq = ac + mass_part

        inside = mp.mpf(0)
        for z, m in selected:
            inside += m * abs(poly_at(r_small, 1 / mp.conj(mp.mpc(z)))) ** 2
        tail_sum = mp.mpf(0)
        for z, m in tail:
            tail_sum += m * abs(poly_at(r_small, 1 / mp.conj(mp.mpc(z)))) ** 2
        return (float(ac), float(inside), float(tail_sum),
                float(mp.sqrt(total_sq)))


def _schwarz_excess(approx: LaurentPolynomial, corrector, inv_poly, n: int,
                    sup_defect: float, seed: int,
                    radii=(0.5, 0.9), count: int = 32) -> float:
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for r in radii:
        pts = r * np.exp(2j * np.pi * rng.random(count))
        diff = np.abs(approx(pts) - _target_values(corrector, inv_poly, pts))
        worst = max(worst, float(np.max(diff - sup_defect * r ** n)))
    return worst


def _run_pipeline(spectrum: PointSpectrum, weight: OuterWeight, n: int,
                  sched: ScheduleParams, kernel: KernelSpec, route: str,
                  seed: int, precision: int):
    _, cap, margin, radius = partial_product(spectrum, n, sched)
    selected, tail = _select(spectrum, cap)

    # reflected back, a coefficient error e shows up as e * |z_max|^n
    corrector = None
    zetas: list = []
    bits_pipe = 128
    if selected:
        z_max = max(abs(z) for z, _ in selected)
        bits_pipe = max(128, 64 + math.ceil(n * math.log2(z_max)))
        with _MP_LOCK, mp.workprec(bits_pipe):
            zetas = [1 / mp.conj(mp.mpc(z)) for z, _ in selected]
        corrector = corrector_with_radius(
            ZeroSet(tuple(complex(zt) for zt in zetas)), radius)

    upto = 2 * n - 1 if route == "vp" else n
    if selected:
        base = _bphi_series(zetas, radius, upto, bits_pipe)
    else:
        base = np.array([mp.mpc(1)], dtype=object)

    def assemble(inv_coeffs: np.ndarray) -> LaurentPolynomial:
        # object coefficients round at the ambient mpmath precision, so the
        # product and the kernel multipliers must run inside the context
        with _MP_LOCK, mp.workprec(bits_pipe):
            if len(inv_coeffs) > 1:
                series = np.convolve(base, inv_coeffs)[: upto + 1]
            else:
                series = base * inv_coeffs[0]
            return convolve(LaurentPolynomial(0, series, precision=bits_pipe),
                            kernel)

    # reciprocal-weight truncation is re-tightened until its tail sits two
    # orders below the measured kernel defect
    tail_target = 1e-12
    inv_coeffs, inv_tail = _inverse_weight(weight, tail_target,
                                           bits=bits_pipe)
    start_grid = _next_pow2(max(16 * n, 1024))
    for _ in range(6):
        approx = assemble(inv_coeffs)
        approx_f = approx.as_complex128()
        inv_poly = LaurentPolynomial(0, inv_coeffs,
                                     precision=bits_pipe).as_complex128()
        sup_defect = _defect_sup(approx_f, corrector, inv_poly, start_grid)
        if inv_tail <= 1e-2 * sup_defect or inv_tail == 0.0:
            break
        tail_target = min(tail_target, 5e-3 * sup_defect)
        prev_len = len(inv_coeffs)
        inv_coeffs, inv_tail = _inverse_weight(weight, tail_target,
                                               bits=bits_pipe)
        if len(inv_coeffs) == prev_len:
            break

    count = len(selected)
    rho_nodes = radius * np.exp(2j * np.pi * np.arange(2048) / 2048)
    m_radius = radius ** count * float(np.max(np.abs(inv_poly(rho_nodes))))
    apriori = m_radius * radius ** (-(n + 1)) / (1.0 - 1.0 / radius)

    r_small = approx.times_z_power(-n)
    competitor = r_small.conj_reflect()

    b_full = math.prod(abs(z) for z, _ in _reflected_pairs(spectrum))
    target0 = b_full / weight.psi0
    leading_gap = abs(complex(approx.coefficient(0)) - target0)

    ac, inside, tail_sum, total_norm = _norm_pieces(
        weight, spectrum, competitor, r_small, selected, tail,
        max(precision, bits_pipe + 32))

    c_run = sched.c_bound
    if c_run is None:
        c_run = 2.0 * sum(1.0 - abs(z) for z, _ in _reflected_pairs(spectrum))
    tail_mu = sum(m for _, m in tail)
    try:
        majorant = math.exp(c_run / sched.eps(n)) * tail_mu
    except OverflowError:
        majorant = math.inf if tail_mu else 0.0

    excess = _schwarz_excess(approx_f, corrector, inv_poly, n, sup_defect,
                             seed)
    cert = PipelineCertificate(
        route=route, n=n, selection_cap=cap, margin_reciprocal=margin,
        radius=radius, selected_count=count, sup_defect=sup_defect,
        apriori_defect=apriori, schedule_decay=sched.decay(n),
        inverse_tail=inv_tail, leading_gap=leading_gap, ac_norm=ac,
        inside_mass_sum=inside, tail_mass_sum=tail_sum,
        tail_majorant=majorant, total_norm=total_norm,
        lower_bound_achieved=abs(complex(approx.coefficient(0))) / total_norm,
        schwarz_excess=excess, schwarz_pass=excess <= 1e-9)
    return approx, cert


def vp_approximant(spectrum: PointSpectrum, weight: OuterWeight, n: int,
                   sched: ScheduleParams | None = None, seed: int = 0,
                   precision: int = 256):
    """Kernel-convolution approximant and its certificate (Laurent route).

    The multiplier is flat through order n and vanishes beyond 2n, so the
    competitor has exponent support inside [-(n-1), n].
    """
    sched = sched or ScheduleParams.default()
    return _run_pipeline(spectrum, weight, n, sched, modified_vp(n), "vp",
                         seed, precision)


def taylor_approximant(spectrum: PointSpectrum, weight: OuterWeight, n: int,
                       sched: ScheduleParams | None = None, seed: int = 0,
                       precision: int = 256):
    """Degree-n truncation approximant and its certificate (polynomial route).

    Requires the near-circle mass tails to pass the slow-decay report for
    at least one exponent; the competitor is a polynomial with support in
    [0, n].
    """
    sched = sched or ScheduleParams.default()
    if len(spectrum):
        report = log_condition_report(spectrum, (1.0, 2.0), max(n, 16))
        if not any(rec["bounded"] for rec in report["per_A"].values()):
            raise LogConditionFailed(
                "near-circle mass tails grow at every tested exponent")
    return _run_pipeline(spectrum, weight, n, sched, dirichlet(n), "taylor",
                         seed, precision)


# ----------------------------------------------------------------------
# convergence experiments


def convergence_experiment(mu: MeasureSpec, n_grid: Sequence[int],
                           which: str = "both", pipeline: bool = False,
                           sched: ScheduleParams | None = None,
                           seed: int = 0) -> dict:
    """Exact leading coefficients against the limit over an n-grid.

    Computes the exact optimum per n (and its error against the limit),
    optionally the pipeline lower bound, and flags whether the error
    sequence is nonincreasing up to a factor 2.
    """
    ns = [int(n) for n in n_grid]
    if ns != sorted(set(ns)):
        raise ValueError("n_grid must be strictly increasing")
    if which not in ("tau", "eta", "both"):
        raise ValueError("which must be tau, eta, or both")
    if pipeline and len(ns) >= 2:
        validate_schedule(sched or ScheduleParams.default(), ns)
    want_tau = which in ("tau", "both")
    want_eta = which in ("eta", "both")
    target = target_limit(mu)
    rows = []
    for n in ns:
        row: dict = {"n": n}
        if want_tau:
            row["tau"] = float(tau_n(mu, n))
            row["tau_error"] = abs(row["tau"] - target)
        if want_eta and n >= 1:
            row["eta"] = float(eta_n(mu, n))
            row["eta_error"] = abs(row["eta"] - target)
        if pipeline:
            if want_eta:
                _, cert = vp_approximant(mu.spectrum, mu.weight, n,
                                         sched, seed, mu.precision)
                row["eta_lower_bound"] = cert.lower_bound_achieved
            if want_tau:
                _, cert = taylor_approximant(mu.spectrum, mu.weight, n,
                                             sched, seed, mu.precision)
                row["tau_lower_bound"] = cert.lower_bound_achieved
        rows.append(row)

    def trend(key: str) -> bool:
        errs = [r[key] for r in rows if key in r]
        return all(errs[i + 1] <= 2.0 * errs[i] + 1e-15
                   for i in range(len(errs) - 1))

    flags = {}
    if want_tau:
        flags["tau"] = trend("tau_error")
    if want_eta:
        flags["eta"] = trend("eta_error")
    return {"target": target, "which": which, "n_grid": ns,
            "rows": rows, "trend": flags}

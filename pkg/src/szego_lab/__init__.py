"""Certified correctors for finite Blaschke products and leading-coefficient
asymptotics of orthogonal systems on the unit circle."""

from szego_lab.asymptotics import (
    SCHEDULE_FAMILIES,
    LogConditionFailed,
    PipelineCertificate,
    ScheduleFn,
    ScheduleParams,
    ScheduleViolation,
    convergence_experiment,
    partial_product,
    taylor_approximant,
    validate_schedule,
    vp_approximant,
)
from szego_lab.blaschke import (
    INSIDE_DISK,
    OUTSIDE_DISK,
    BlaschkeProduct,
    DerivSup,
    DilatedCorrector,
    PoleProximityError,
    TaylorToleranceError,
    ZeroSet,
    build_corrector,
    corrector_certificate,
    corrector_with_radius,
    derivative_sup,
    eval_B_phi,
    eval_blaschke,
    eval_phi0,
    taylor_coeffs,
)
from szego_lab.circle_fourier import (
    CircleGrid,
    KernelDomainError,
    KernelSpec,
    LaurentPolynomial,
    SupBound,
    besov_seminorm,
    convolve,
    dirichlet,
    kernel_coeffs,
    kernel_identity_vk_vpn,
    kernel_multiplier,
    kernel_support,
    lp_norm,
    modified_v,
    modified_vp,
    sup_norm,
    sup_norm_certified,
    vallee_poussin,
)
from szego_lab.measure_opuc import (
    MeasureSpec,
    OuterWeight,
    PointSpectrum,
    PrecisionExhausted,
    QuadratureError,
    ReflectedBlaschke,
    eta_n,
    gram_laurent,
    gram_polynomial,
    log_condition_report,
    moment,
    orthonormal_element,
    residue_identity_check,
    target_limit,
    tau_n,
)
from szego_lab.xlinalg import (
    PRECISION_BITS,
    CholeskyFactor,
    HermitianMatrix,
    NotPositiveDefinite,
    PrecisionTag,
    cholesky,
    constrained_max_leading,
    frobenius_residual,
    next_tag,
    schur_leading,
    solve_lower,
    solve_upper_conj,
)

__version__ = "0.1.0"

__all__ = [
    "BlaschkeProduct",
    "CholeskyFactor",
    "CircleGrid",
    "DerivSup",
    "DilatedCorrector",
    "HermitianMatrix",
    "INSIDE_DISK",
    "KernelDomainError",
    "KernelSpec",
    "LaurentPolynomial",
    "LogConditionFailed",
    "MeasureSpec",
    "NotPositiveDefinite",
    "OUTSIDE_DISK",
    "OuterWeight",
    "PRECISION_BITS",
    "PipelineCertificate",
    "PointSpectrum",
    "PoleProximityError",
    "PrecisionExhausted",
    "PrecisionTag",
    "QuadratureError",
    "ReflectedBlaschke",
    "SCHEDULE_FAMILIES",
    "ScheduleFn",
    "ScheduleParams",
    "ScheduleViolation",
    "SupBound",
    "TaylorToleranceError",
    "ZeroSet",
    "besov_seminorm",
    "build_corrector",
    "cholesky",
    "constrained_max_leading",
    "convergence_experiment",
    "convolve",
    "corrector_certificate",
    "corrector_with_radius",
    "derivative_sup",
    "dirichlet",
    "eta_n",
    "eval_B_phi",
    "eval_blaschke",
    "eval_phi0",
    "frobenius_residual",
    "gram_laurent",
    "gram_polynomial",
    "kernel_coeffs",
    "kernel_identity_vk_vpn",
    "kernel_multiplier",
    "kernel_support",
    "log_condition_report",
    "lp_norm",
    "modified_v",
    "modified_vp",
    "moment",
    "next_tag",
    "orthonormal_element",
    "partial_product",
    "residue_identity_check",
    "schur_leading",
    "solve_lower",
    "solve_upper_conj",
    "sup_norm",
    "sup_norm_certified",
    "target_limit",
    "tau_n",
    "taylor_approximant",
    "taylor_coeffs",
    "validate_schedule",
    "vallee_poussin",
    "vp_approximant",
    "__version__",
]

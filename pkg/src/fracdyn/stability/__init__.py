"""Stability analysis built on the solver and the Mittag-Leffler kernels."""

from fracdyn.stability.decay import DecayFit, check_no_fast_decay, check_separation, decade_fits, fit_decay
from fracdyn.stability.local import ball_points, linearize, lipschitz_modulus
from fracdyn.stability.lyapunov import (
    LyapunovCertificate,
    SuperSolution,
    build_super_solution,
    check_certificate,
    comparison_rhs,
    predicted_decay,
    quadratic_certificate,
    verify_comparison,
)
from fracdyn.stability.perron import (
    PerronConstants,
    admissible_radius,
    estimate_C1,
    estimate_C3,
    estimate_C_alpha_A,
    perron_apply,
    sup_term,
    weighted_norm,
)
from fracdyn.stability.sector import SectorReport, SectorVerdict, in_sector, sector_classify

__all__ = [
    "DecayFit",
    "LyapunovCertificate",
    "PerronConstants",
    "SectorReport",
    "SectorVerdict",
    "SuperSolution",
    "admissible_radius",
    "ball_points",
    "build_super_solution",
    "check_certificate",
    "check_no_fast_decay",
    "check_separation",
    "comparison_rhs",
    "decade_fits",
    "estimate_C1",
    "estimate_C3",
    "estimate_C_alpha_A",
    "fit_decay",
    "in_sector",
    "linearize",
    "lipschitz_modulus",
    "perron_apply",
    "predicted_decay",
    "quadratic_certificate",
    "sector_classify",
    "sup_term",
    "verify_comparison",
    "weighted_norm",
]

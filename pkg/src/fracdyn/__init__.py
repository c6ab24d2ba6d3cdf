"""Caputo fractional differential equations: Mittag-Leffler functions,
fractional calculus on meshes, a predictor-corrector solver and numerical
stability analysis."""

from fracdyn.errors import (
    DomainError,
    FieldEvaluationError,
    FracDynError,
    InputError,
    MLAccuracyError,
    NoCertificateError,
    NumericError,
    UnsupportedStructureError,
)
from fracdyn.fraccalc import SampledFunction, caputo_derivative, convolution_weights, rl_integral
from fracdyn.mlf import MLEvalRequest, MLEvalResult, Region, mittag_leffler, ml_matrix, ml_scalar
from fracdyn.solver import CaputoIVP, SolverConfig, Status, Trajectory, residual_check, solve_ivp, solve_linear

__all__ = [
    "CaputoIVP",
    "DomainError",
    "FieldEvaluationError",
    "FracDynError",
    "InputError",
    "MLAccuracyError",
    "MLEvalRequest",
    "MLEvalResult",
    "NoCertificateError",
    "NumericError",
    "Region",
    "SampledFunction",
    "SolverConfig",
    "Status",
    "Trajectory",
    "UnsupportedStructureError",
    "caputo_derivative",
    "convolution_weights",
    "mittag_leffler",
    "ml_matrix",
    "ml_scalar",
    "residual_check",
    "rl_integral",
    "solve_ivp",
    "solve_linear",
]

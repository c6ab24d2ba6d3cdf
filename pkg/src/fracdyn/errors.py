from __future__ import annotations


class FracDynError(Exception):
    """Base class for all package errors."""


class InputError(FracDynError, ValueError):
    """Invalid arguments (bad grids, orders, shapes)."""


class NumericError(FracDynError, ArithmeticError):
    """A numerical routine produced non-finite values or failed."""


class MLAccuracyError(NumericError):
    """Mittag-Leffler evaluation did not reach the requested accuracy."""

    def __init__(self, message: str, value=None, est_error: float = float("inf")) -> None:
        super().__init__(message)
        self.value = value
        self.est_error = est_error


class DomainError(FracDynError, ValueError):
    """An eigenvalue lies outside the stability sector a bound is claimed for."""


class NoCertificateError(FracDynError):
    """No admissible radius exists for the tested range."""


class UnsupportedStructureError(FracDynError):
    """Input structure not handled (e.g. non-diagonal linear part)."""


class FieldEvaluationError(FracDynError):
    """The vector field raised while being evaluated at a mesh node."""

    def __init__(self, message: str, node: int) -> None:
        super().__init__(message)
        self.node = node

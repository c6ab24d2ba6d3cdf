"""Eigenvalue sector test for linearized Mittag-Leffler stability."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from fracdyn.errors import DomainError, InputError, NumericError
from fracdyn.report import Report


class SectorVerdict(str, enum.Enum):
    STABLE_SECTOR = "stable_sector"
    NOT_IN_SECTOR = "not_in_sector"
    ZERO_EIGENVALUE = "zero_eigenvalue"


@dataclass(frozen=True)
class SectorReport:
    alpha: float
    eigenvalues: np.ndarray
    in_sector: np.ndarray
    verdict: SectorVerdict

    def as_report(self) -> Report:
        margins = {"arg_minus_half_angle": [abs(np.angle(l)) - self.alpha * math.pi / 2 for l in self.eigenvalues]}
        return Report(
            "sector_classify",
            self.verdict.value,
            inputs={"alpha": self.alpha},
            margins=margins,
            constants={"eigenvalues": list(self.eigenvalues), "in_sector": list(self.in_sector)},
        )


def in_sector(alpha: float, lam: complex) -> bool:
    """``lam != 0`` and ``|arg lam| > alpha*pi/2``."""
    lam = complex(lam)
    return lam != 0 and abs(np.angle(lam)) > alpha * math.pi / 2


def require_sector(alpha: float, lam: complex) -> None:
    if not in_sector(alpha, lam):
        raise DomainError(f"eigenvalue {lam} is outside the stability sector for alpha={alpha}")


def sector_classify(alpha: float, A) -> SectorReport:
    A = np.atleast_2d(np.asarray(A))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"A must be square, got shape {A.shape}")
    if not 0 < alpha < 2:
        raise InputError(f"alpha must lie in (0, 2), got {alpha}")
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue computation failed: {exc}") from exc
    if not np.all(np.isfinite(eig)):
        raise NumericError("non-finite eigenvalues")
    # zero test relative to the matrix scale keeps the verdict scale invariant
    scale = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    zero = np.abs(eig) <= 1e-12 * scale
    flags = np.array([(not z) and in_sector(alpha, l) for l, z in zip(eig, zero)])
    if np.any(zero):
        verdict = SectorVerdict.ZERO_EIGENVALUE
    elif np.all(flags):
        verdict = SectorVerdict.STABLE_SECTOR
    else:
        verdict = SectorVerdict.NOT_IN_SECTOR
    return SectorReport(float(alpha), eig, flags, verdict)

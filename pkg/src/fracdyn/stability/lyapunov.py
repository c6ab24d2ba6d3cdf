"""Lyapunov certificates, super-solutions and the comparison check."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from fracdyn.errors import InputError
from fracdyn.fraccalc import SampledFunction, caputo_derivative_all
from fracdyn.report import Report
from fracdyn.stability.local import DEFAULT_SEED, ball_points


@dataclass(frozen=True)
class LyapunovCertificate:
    """Candidate ``V`` with ``C1 |x|^a <= V <= C2 |x|^b`` and ``<grad V, f> <= -C3 |x|^c`` on ``|x| <= r``."""

    V: Callable[[np.ndarray], float]
    gradV: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float
    c: float
    C1: float
    C2: float
    C3: float
    r: float
    dim: int = 1

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0 and self.r > 0):
            raise InputError("a, b and r must be positive")
        if not (self.C1 > 0 and self.C2 > 0):
            raise InputError("C1 and C2 must be positive")
        if self.C3 < 0 or self.c < 0:
            raise InputError("C3 and c must be non-negative")

    @property
    def strict(self) -> bool:
        return self.C3 > 0

    @property
    def p(self) -> float:
        return self.c / self.b

    @property
    def A_coef(self) -> float:
        """``A = -C3 / C2^(c/b)`` of the scalar comparison equation."""
        return -self.C3 / self.C2 ** (self.c / self.b)


def quadratic_certificate(C3: float, c: float, r: float, dim: int = 1) -> LyapunovCertificate:
    """``V = |x|^2`` with ``a = b = 2`` and ``C1 = C2 = 1``."""
    return LyapunovCertificate(
        V=lambda x: float(np.dot(x, x)),
        gradV=lambda x: 2.0 * np.asarray(x, dtype=float),
        a=2.0,
        b=2.0,
        c=c,
        C1=1.0,
        C2=1.0,
        C3=C3,
        r=r,
        dim=dim,
    )


def check_certificate(
    cert: LyapunovCertificate, field: Callable, samples: int = 16384, seed: int = DEFAULT_SEED, rtol: float = 1e-12
) -> Report:
    """Sample the ball of radius ``cert.r`` and report worst-case margins.

    A margin is ``(allowed bound) - (observed value)``; the check passes
    when every margin is ``>= -rtol * scale``.  Convexity is spot-checked by
    the midpoint inequality on pairs of sample points.
    """
    if samples < 10_000:
        raise InputError("certificate checks need at least 10^4 sample points")
    pts = ball_points(cert.dim, cert.r, samples, seed)
    nx = np.linalg.norm(pts, axis=1)
    V = np.array([cert.V(x) for x in pts])
    G = np.array([np.atleast_1d(cert.gradV(x)) for x in pts], dtype=float)
    F = np.array([np.atleast_1d(field(x)) for x in pts], dtype=float)
    inner = np.sum(G * F, axis=1)

    lower = V - cert.C1 * nx**cert.a
    upper = cert.C2 * nx**cert.b - V
    decay = -cert.C3 * nx**cert.c - inner
    half = samples // 2
    x, y = pts[:half], pts[half : 2 * half]
    mid = np.array([cert.V(m) for m in 0.5 * (x + y)])
    convex = 0.5 * (V[:half] + V[half : 2 * half]) - mid

    def tol_for(*arrs):
        return rtol * max(1.0, *(float(np.max(np.abs(a))) for a in arrs))

    t2 = tol_for(V)
    t3 = tol_for(inner, cert.C3 * nx**cert.c)
    v1 = bool(np.min(convex) >= -t2)
    v2 = bool(min(lower.min(), upper.min()) >= -t2)
    v3 = bool(decay.min() >= -t3)
    worst = int(np.argmin(decay))
    return Report(
        "check_certificate",
        "pass" if (v1 and v2 and v3) else "fail",
        inputs={"a": cert.a, "b": cert.b, "c": cert.c, "C1": cert.C1, "C2": cert.C2, "C3": cert.C3, "r": cert.r},
        margins={
            "v1_ok": v1,
            "v2_ok": v2,
            "v3_ok": v3,
            "v1_min_midpoint_gap": float(convex.min()),
            "v2_lower_min": float(lower.min()),
            "v2_upper_min": float(upper.min()),
            "v3_min": float(decay.min()),
            "v3_max_violation": float(max(0.0, -decay.min())),
            "v3_worst_point": pts[worst],
            "v3_mean": float(decay.mean()),
        },
        grids={"samples": samples, "seed": seed, "sequence": "scrambled Sobol"},
        tolerances={"v2": t2, "v3": t3},
    )


@dataclass(frozen=True)
class DecayPrediction:
    classification: str  # "stable" or "mittag_leffler"
    exponent: float | None


def predicted_decay(cert: LyapunovCertificate, alpha: float) -> DecayPrediction:
    """Guaranteed power decay ``alpha b / (a c)`` when ``C3 > 0``; plain stability otherwise."""
    if not cert.strict:
        return DecayPrediction("stable", None)
    if cert.c <= 0:
        raise InputError("c must be positive for a decay exponent")
    return DecayPrediction("mittag_leffler", alpha * cert.b / (cert.a * cert.c))


@dataclass(frozen=True)
class SuperSolution:
    """``w = V0`` on ``[0, t1]`` and ``C t^(-alpha/p)`` afterwards."""

    V0: float
    A_coef: float
    p: float
    alpha: float
    t1: float
    C: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            tail = self.C * np.where(t > 0, t, 1.0) ** (-self.alpha / self.p)
        out = np.where(t <= self.t1, self.V0, tail)
        return out if out.ndim else float(out)


def build_super_solution(V0: float, A_coef: float, p: float, alpha: float) -> SuperSolution:
    """Piecewise super-solution of ``CD^alpha y = A y^p``, ``y(0) = V0``.

    ``t1^alpha = V0^(1-p)/(-A) * (2^alpha/Gamma(1-alpha) + (alpha/p) 2^(alpha+alpha/p)/Gamma(2-alpha))``
    and ``C = V0 t1^(alpha/p)`` so ``w`` is continuous at ``t1``.
    """
    if p <= 0:
        raise InputError(f"p must be positive, got {p}")
    if V0 <= 0:
        raise InputError(f"V0 must be positive, got {V0}")
    if A_coef >= 0:
        raise InputError(f"A must be negative, got {A_coef}")
    a = alpha
    bracket = 2**a / math.gamma(1 - a) + (a / p) * 2 ** (a + a / p) / math.gamma(2 - a)
    t1 = (V0 ** (1 - p) / (-A_coef) * bracket) ** (1 / a)
    C = V0 * t1 ** (a / p)
    return SuperSolution(V0, A_coef, p, a, t1, C)


def comparison_rhs(A_coef: float, p: float) -> Callable:
    """``L(y) = A sign(y) |y|^p``: non-increasing for ``A < 0``."""
    return lambda y: A_coef * np.sign(y) * np.abs(y) ** p


# {{{ comparison


def _derivative_with_error(f: SampledFunction, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Caputo derivative at every node plus a per-node error estimate.

    The estimate is the change against the same formula on the grid with
    every other node dropped; odd nodes take the larger of their neighbours'
    estimates.
    """
    d_fine = caputo_derivative_all(f, alpha)
    t = f.times
    n = t.size
    err = np.zeros(n)
    if n >= 5:
        coarse = SampledFunction(t[::2], f.values[::2])
        d_coarse = caputo_derivative_all(coarse, alpha)
        e_even = np.abs(d_fine[::2] - d_coarse)
        if e_even.ndim > 1:
            e_even = e_even.max(axis=1)
        err[::2] = e_even
        odd = np.arange(1, n, 2)
        left = e_even[(odd - 1) // 2]
        right = e_even[np.minimum((odd + 1) // 2, e_even.size - 1)]
        err[odd] = np.maximum(left, right)
    return d_fine, err


def verify_comparison(
    m1: SampledFunction,
    m2: SampledFunction,
    L: Callable,
    alpha: float,
    m0: float | None = None,
    tol_factor: float = 5.0,
) -> Report:
    """Check the comparison hypotheses for ``m1`` (super) and ``m2`` (sub), then the ordering.

    Hypotheses at interior nodes ``t_j > 0``::

        CD^alpha m1 >= L(m1) - tol_j,   m1(0) >= m0
        CD^alpha m2 <= L(m2) + tol_j,   m2(0) <= m0

    with ``tol_j = tol_factor * (discretization error estimate)``.  The
    ordering ``m1 >= m2`` is only claimed when every hypothesis holds.
    """
    if m1.times.shape != m2.times.shape or not np.array_equal(m1.times, m2.times):
        raise InputError("m1 and m2 must share the same grid")
    v1 = np.asarray(m1.values, dtype=float).reshape(-1)
    v2 = np.asarray(m2.values, dtype=float).reshape(-1)
    if v1.size != m1.times.size or v2.size != m2.times.size:
        raise InputError("comparison works on scalar functions")
    t = m1.times
    lo, hi = min(v1.min(), v2.min()), max(v1.max(), v2.max())
    probe = np.linspace(lo, hi, 257) if hi > lo else np.array([lo])
    Lp = np.array([L(y) for y in probe], dtype=float)
    if np.any(np.diff(Lp) > 1e-12 * max(1.0, np.max(np.abs(Lp)))):
        raise InputError("L must be non-increasing on the range of m1 and m2")
    m0 = float(v1[0]) if m0 is None else float(m0)

    d1, e1 = _derivative_with_error(SampledFunction(t, v1), alpha)
    d2, e2 = _derivative_with_error(SampledFunction(t, v2), alpha)
    L1 = np.array([L(y) for y in v1], dtype=float)
    L2 = np.array([L(y) for y in v2], dtype=float)
    tol1 = tol_factor * e1 + 1e-12
    tol2 = tol_factor * e2 + 1e-12
    r1 = (d1 - L1)[1:] + tol1[1:]  # >= 0 required
    r2 = (L2 - d2)[1:] + tol2[1:]
    h1 = bool(np.all(r1 >= 0) and v1[0] >= m0)
    h2 = bool(np.all(r2 >= 0) and v2[0] <= m0)

    gap = v1 - v2
    gap_tol = 1e-12 * max(1.0, float(np.max(np.abs(v1))))
    bad = np.flatnonzero(gap < -gap_tol)
    first_violation = int(bad[0]) if bad.size else None
    warnings = []
    if not (h1 and h2):
        verdict = "hypotheses_failed"
        warnings.append("hypotheses not satisfied; no ordering is claimed")
    elif first_violation is None:
        verdict = "ordering_holds"
    else:
        verdict = "ordering_violated"
        warnings.append("hypotheses hold but the ordering fails; check the discretization")

    def first_neg(r):
        k = np.flatnonzero(r < 0)
        return int(k[0] + 1) if k.size else None

    return Report(
        "verify_comparison",
        verdict,
        inputs={"alpha": alpha, "m0": m0, "nodes": int(t.size)},
        margins={
            "hyp_super_ok": h1,
            "hyp_sub_ok": h2,
            "hyp_super_min": float(np.min((d1 - L1)[1:])),
            "hyp_sub_min": float(np.min((L2 - d2)[1:])),
            "hyp_super_first_fail": first_neg(r1),
            "hyp_sub_first_fail": first_neg(r2),
            "min_gap": float(gap.min()),
            "first_violating_node": first_violation,
            "first_violating_time": None if first_violation is None else float(t[first_violation]),
        },
        grids={"t_min": float(t[0]), "t_max": float(t[-1]), "n": int(t.size)},
        tolerances={
            "factor": tol_factor,
            "max_error_estimate_super": float(e1.max()),
            "max_error_estimate_sub": float(e2.max()),
        },
        warnings=warnings,
    )


# }}}

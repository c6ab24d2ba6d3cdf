"""Constants, admissible radius and the Lyapunov-Perron operator for diagonal linear parts.

All suprema over unbounded time ranges are replaced by maxima over
log-spaced grids up to ``t_max``; the refinement check (same grid with every
other point dropped) is reported next to each value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from fracdyn.errors import InputError, NoCertificateError, UnsupportedStructureError
from fracdyn.mlf import mittag_leffler, rgamma
from fracdyn.report import Report
from fracdyn.solver import Trajectory
from fracdyn.stability.local import lipschitz_modulus
from fracdyn.stability.sector import require_sector

T_MAX_CONSTANTS = 1e3

_GL_HI = np.polynomial.legendre.leggauss(16)
_GL_LO = np.polynomial.legendre.leggauss(8)


def _gl(fun, a: float, b: float, rule) -> float:
    x, w = rule
    m, r = 0.5 * (a + b), 0.5 * (b - a)
    return r * float(np.dot(w, fun(m + r * x)))


def integrate(fun, edges: Sequence[float], tol: float = 1e-11, max_depth: int = 40) -> tuple[float, float]:
    """Adaptive composite Gauss-Legendre over the given breakpoints.

    *fun* must accept arrays.  Returns ``(value, error_estimate)``; the
    estimate is the summed 8-vs-16 point discrepancy, which is pessimistic
    for the 16-point value that is returned.
    """
    stack = [(float(a), float(b), 0) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    npan = max(len(stack), 1)
    total, err = 0.0, 0.0
    while stack:
        a, b, depth = stack.pop()
        hi = _gl(fun, a, b, _GL_HI)
        lo = _gl(fun, a, b, _GL_LO)
        e = abs(hi - lo)
        if e <= max(tol / (npan * 2.0**depth), 1e-15 * abs(hi)) or depth >= max_depth:
            total += hi
            err += e
        else:
            m = 0.5 * (a + b)
            stack.append((a, m, depth + 1))
            stack.append((m, b, depth + 1))
    return total, err


def _log_grid(t_lo: float, t_hi: float, n: int) -> np.ndarray:
    return np.logspace(math.log10(t_lo), math.log10(t_hi), n)


@dataclass(frozen=True)
class Estimate:
    """A numerically estimated constant with its diagnostics."""

    value: float
    error: float = 0.0
    argmax: float | None = None
    refinement_change: float = 0.0
    grid: dict = field(default_factory=dict)


# {{{ C1, C3


def estimate_C1(alpha: float, lam: complex, t_max: float = T_MAX_CONSTANTS, n: int = 401) -> Estimate:
    """``sup_t |E_alpha(lam t^alpha)| / E_alpha(-t^alpha)`` on a log grid (plus ``t = 0``)."""
    require_sector(alpha, lam)
    if t_max < 1e3:
        raise InputError("t_max must be at least 1e3")
    t = np.concatenate([[0.0], _log_grid(1e-6, t_max, n)])
    ta = t**alpha
    num = np.abs(mittag_leffler(complex(lam) * ta, alpha))
    den = mittag_leffler(-ta, alpha)
    ratio = num / den
    i = int(np.argmax(ratio))
    coarse = float(np.max(ratio[::2]))
    value = float(ratio[i])
    return Estimate(
        value,
        argmax=float(t[i]),
        refinement_change=abs(value - coarse),
        grid={"kind": "log", "t_min": 1e-6, "t_max": t_max, "n": int(t.size)},
    )


def _tail_series(alpha: float, lam: complex, terms: int = 6):
    """Large-argument expansion of ``E_{alpha,alpha}(z)``; the ``k = 1`` term vanishes."""
    coef = [-rgamma(alpha - alpha * k) for k in range(2, 2 + terms)]

    def f(z):
        return sum(c * z ** (-(k + 2)) for k, c in enumerate(coef[:-1]))

    def last(z):
        return coef[-1] * z ** (-(terms + 1))

    return f, last


def estimate_C3(alpha: float, lam: complex, tol: float = 1e-11) -> Estimate:
    """``int_0^inf tau^(alpha-1) |E_{alpha,alpha}(lam tau^alpha)| dtau``.

    With ``u = tau^alpha`` this is ``(1/alpha) int_0^inf |E_{alpha,alpha}(lam u)| du``.
    The range ``[0, U]`` is integrated numerically; beyond ``U`` the
    algebraic large-argument expansion is integrated instead.
    """
    require_sector(alpha, lam)
    lam = complex(lam)
    L = abs(lam)
    theta = abs(np.angle(lam))
    # choose U so any exponentially decaying pole contribution is negligible
    zmin = 2e3
    if theta < alpha * math.pi:
        decay = -math.cos(theta / alpha)
        zmin = max(zmin, (60.0 / decay) ** alpha)
    U = zmin / L

    def g(u):
        return np.abs(mittag_leffler(lam * u, alpha, alpha)) / alpha

    edges = np.concatenate([[0.0], _log_grid(1e-3 / L, U, 8 * int(math.log10(U * L / 1e-3)) + 1)])
    head, err = integrate(g, edges, tol)

    ser, last = _tail_series(alpha, lam)

    def tail(v):
        z = lam * U / v
        return np.abs(ser(z)) * U / v**2 / alpha

    def tail_err(v):
        z = lam * U / v
        return np.abs(last(z)) * U / v**2 / alpha

    vt = np.linspace(0.0, 1.0, 9)
    vt[0] = 1e-300
    tail_val, terr = integrate(tail, vt, tol * 1e-2)
    trunc, _ = integrate(tail_err, vt, 1e-3)
    return Estimate(
        head + tail_val,
        error=err + terr + abs(trunc),
        grid={"split": U, "panels": int(edges.size - 1)},
    )


# }}}


# {{{ sup term and C(alpha, A)


def _inner_integral(alpha: float, t: float, tol: float) -> float:
    """``int_0^t (t-s)^(alpha-1) E_{alpha,alpha}(-(t-s)^alpha) s^(-alpha) ds``, split at ``t/2``."""
    a = alpha
    # [0, t/2]: s = v^(1/(1-a)) removes s^(-a)
    vmax = (t / 2) ** (1 - a)

    def left(v):
        s = v ** (1 / (1 - a))
        u = t - s
        return u ** (a - 1) * mittag_leffler(-(u**a), a, a) / (1 - a)

    # [t/2, t]: w = (t-s)^a removes (t-s)^(a-1)
    wmax = (t / 2) ** a

    def right(w):
        s = t - w ** (1 / a)
        return mittag_leffler(-w, a, a) * s ** (-a) / a

    e1 = np.linspace(0.0, vmax, 5)
    e2 = np.concatenate([[0.0], np.geomspace(min(1.0, wmax) * 1e-2, wmax, 6)]) if wmax > 1e-2 else [0.0, wmax]
    v1, _ = integrate(left, e1, tol)
    v2, _ = integrate(right, np.unique(e2), tol)
    return v1 + v2


def sup_term(alpha: float, t_max: float = T_MAX_CONSTANTS, n: int = 33, tol: float = 1e-10) -> Estimate:
    """``sup_{t >= 1} t^alpha int_0^t (t-s)^(alpha-1) E_{alpha,alpha}(-(t-s)^alpha) s^(-alpha) ds``."""
    t = _log_grid(1.0, t_max, n)
    vals = np.array([tt**alpha * _inner_integral(alpha, tt, tol) for tt in t])
    i = int(np.argmax(vals))
    coarse = float(np.max(vals[::2]))
    warn = {}
    if i == t.size - 1:
        warn["at_t_max"] = True
    return Estimate(
        float(vals[i]),
        argmax=float(t[i]),
        refinement_change=abs(float(vals[i]) - coarse),
        grid={"kind": "log", "t_min": 1.0, "t_max": t_max, "n": n, **warn},
    )


@dataclass
class PerronConstants:
    alpha: float
    eigenvalues: np.ndarray
    C1: list
    C3: list
    sup_term: Estimate
    C_alpha_A: float
    t_max: float = T_MAX_CONSTANTS
    r: float | None = None
    q: float | None = None
    r_star: float | None = None
    denominator: float | None = None
    warnings: list = field(default_factory=list)

    def as_report(self) -> Report:
        return Report(
            "estimate_C_alpha_A" if self.r is None else "admissible_radius",
            "pass" if self.r_star is None or self.r_star > 0 else "fail",
            inputs={"alpha": self.alpha, "eigenvalues": list(self.eigenvalues)},
            constants={
                "C1": [c.value for c in self.C1],
                "C3": [c.value for c in self.C3],
                "sup_term": self.sup_term.value,
                "C_alpha_A": self.C_alpha_A,
                "r": self.r,
                "q": self.q,
                "r_star": self.r_star,
                "denominator": self.denominator,
            },
            margins={
                "C3_quadrature_error": max(c.error for c in self.C3),
                "sup_term_refinement_change": self.sup_term.refinement_change,
                "C1_refinement_change": max(c.refinement_change for c in self.C1),
            },
            grids={"t_max": self.t_max, "sup_term": self.sup_term.grid},
            warnings=list(self.warnings),
        )


def estimate_C_alpha_A(alpha: float, eigenvalues, t_max: float = T_MAX_CONSTANTS) -> PerronConstants:
    """``max_i C3(lam_i) + max_i C1(lam_i) * sup_term``."""
    eig = np.atleast_1d(np.asarray(eigenvalues, dtype=complex))
    for lam in eig:
        require_sector(alpha, lam)
    # identical eigenvalues share constants
    uniq = {complex(l): None for l in eig}
    c1 = {l: estimate_C1(alpha, l, t_max) for l in uniq}
    c3 = {l: estimate_C3(alpha, l) for l in uniq}
    s = sup_term(alpha, t_max)
    C = max(c.value for c in c3.values()) + max(c.value for c in c1.values()) * s.value
    warnings = [f"suprema over t >= 1 are truncated at t_max={t_max:g}"]
    if s.grid.get("at_t_max"):
        warnings.append("sup term still increasing at t_max")
    return PerronConstants(
        float(alpha),
        eig,
        [c1[complex(l)] for l in eig],
        [c3[complex(l)] for l in eig],
        s,
        float(C),
        t_max,
        warnings=warnings,
    )


# }}}


# {{{ radius


def ml_sup_denominator(alpha: float, eigenvalues, t_max: float = T_MAX_CONSTANTS, n: int = 201) -> float:
    """``max_i { sup_[0,1] |E_alpha(lam_i t^alpha)| + sup_[1,t_max] t^alpha |E_alpha(lam_i t^alpha)| }``."""
    best = 0.0
    t0 = np.concatenate([[0.0], _log_grid(1e-6, 1.0, n)])
    t1 = _log_grid(1.0, t_max, n)
    for lam in {complex(l) for l in np.atleast_1d(eigenvalues)}:
        head = np.max(np.abs(mittag_leffler(lam * t0**alpha, alpha)))
        tail = np.max(t1**alpha * np.abs(mittag_leffler(lam * t1**alpha, alpha)))
        best = max(best, float(head + tail))
    return best


def admissible_radius(
    pc: PerronConstants,
    remainder: Callable | None = None,
    lipschitz: Callable[[float], float] | None = None,
    r_max: float = 1.0,
    r_min: float = 1e-8,
    q_target: float = 0.5,
    seed: int = 0,
) -> PerronConstants:
    """Find ``r`` with ``q = C(alpha, A) l_h(r) <= q_target`` and ``r* = r (1 - q) / D``.

    ``l_h`` comes from :func:`lipschitz_modulus` of *remainder* unless a
    *lipschitz* function of ``r`` is supplied.  Bisection is done in
    ``log r`` between *r_min* and *r_max*.
    """
    d = pc.eigenvalues.size
    if lipschitz is None:
        if remainder is None:
            raise InputError("need either the remainder field or a Lipschitz function")
        lipschitz = lambda r: lipschitz_modulus(remainder, r, d, seed=seed)  # noqa: E731
    C = pc.C_alpha_A
    q_of = lambda r: C * lipschitz(r)  # noqa: E731
    warnings = list(pc.warnings)

    if q_of(r_max) <= q_target:
        r = r_max
    else:
        q_lo = q_of(r_min)
        if q_lo >= 1.0:
            raise NoCertificateError(
                f"q = C(alpha,A) l_h(r) = {q_lo:.3g} >= 1 already at r = {r_min:g}"
            )
        if q_lo > q_target:
            r = r_min
            warnings.append(f"q target {q_target} not reached; using q={q_lo:.3g} < 1 at r_min")
        else:
            lo, hi = math.log(r_min), math.log(r_max)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if q_of(math.exp(mid)) <= q_target:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-6:
                    break
            r = math.exp(lo)
    q = q_of(r)
    D = ml_sup_denominator(pc.alpha, pc.eigenvalues, pc.t_max)
    pc.r, pc.q, pc.denominator = float(r), float(q), D
    pc.r_star = float(r * (1 - q) / D)
    pc.warnings = warnings
    return pc


# }}}


# {{{ weighted norm


@dataclass(frozen=True)
class WeightedNorm:
    value: float
    head: float
    tail: float
    unbounded_trend: bool
    tail_slope: float


def weighted_norm(traj: Trajectory, alpha: float, slope_tol: float | None = None) -> WeightedNorm:
    """``max{ sup_[0,1] |x|, sup_[1,T] t^alpha |x| }`` over the nodes.

    ``unbounded_trend`` is set when ``t^alpha |x|`` is maximal at the end and
    its log-log slope over the last half decade exceeds *slope_tol*
    (default ``alpha / 10``).
    """
    t = traj.times
    if t[-1] < 1.0:
        raise InputError(f"trajectory ends at t={t[-1]:g} < 1")
    nx = traj.norms()
    head = float(np.max(nx[t <= 1.0]))
    m = t >= 1.0
    y = t[m] ** alpha * nx[m]
    tail = float(np.max(y))
    slope_tol = alpha / 10 if slope_tol is None else slope_tol
    last = t[m] >= t[-1] / math.sqrt(10)
    slope = 0.0
    if np.count_nonzero(last) >= 2 and np.all(y[last] > 0):
        slope = float(np.polyfit(np.log(t[m][last]), np.log(y[last]), 1)[0])
    trend = bool(tail > 0 and y[-1] >= tail * (1 - 1e-12) and slope > slope_tol)
    return WeightedNorm(max(head, tail), head, tail, trend, slope)


def weighted_sup(times: np.ndarray, values: np.ndarray, alpha: float) -> float:
    values = np.asarray(values)
    nx = np.abs(values) if values.ndim == 1 else np.linalg.norm(values, axis=1)
    w = np.where(times <= 1.0, 1.0, np.maximum(times, 1.0) ** alpha)
    return float(np.max(w * nx))


# }}}


# {{{ Lyapunov-Perron operator


def _diagonal(eigenvalues) -> np.ndarray:
    A = np.asarray(eigenvalues)
    if A.ndim == 2:
        if A.shape[0] != A.shape[1]:
            raise InputError("matrix must be square")
        if np.any(A - np.diag(np.diag(A))):
            raise UnsupportedStructureError(
                "perron_apply needs a diagonal linear part; transform the system first"
            )
        return np.diag(A).astype(complex)
    return np.atleast_1d(A).astype(complex)


def _primitives(alpha: float, lam: complex, sig: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = lam * sig**alpha
    e1 = np.asarray(mittag_leffler(z, alpha, alpha + 1), dtype=complex)
    e2 = np.asarray(mittag_leffler(z, alpha, alpha + 2), dtype=complex)
    return sig**alpha * e1, sig ** (alpha + 1) * (e1 - e2)


def perron_apply(alpha: float, eigenvalues, remainder: Callable, x0, xi: Trajectory) -> Trajectory:
    """Apply the Lyapunov-Perron operator to the trajectory *xi*.

    Component ``i`` is ``E_alpha(t^alpha lam_i) x0_i + int_0^t (t-s)^(alpha-1)
    E_{alpha,alpha}((t-s)^alpha lam_i) h_i(xi(s)) ds``.  ``h(xi)`` is
    interpolated linearly between nodes and integrated exactly against the
    kernel through its primitives

    ``P0(s) = s^alpha E_{alpha,alpha+1}(lam s^alpha)``,
    ``P1(s) = s^(alpha+1) [E_{alpha,alpha+1} - E_{alpha,alpha+2}](lam s^alpha)``.

    On a uniform mesh the kernel is needed at N distinct lags only; other
    meshes cost O(N^2) Mittag-Leffler evaluations and are meant for small N.
    """
    lam = _diagonal(eigenvalues)
    t = xi.times
    X = xi.states
    d = lam.size
    if X.shape[1] != d:
        raise InputError(f"trajectory has {X.shape[1]} components, expected {d}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    H = np.array([np.atleast_1d(remainder(x)) for x in X], dtype=float)
    n = t.size
    a = alpha
    steps = np.diff(t)
    uniform = n > 2 and np.ptp(steps) <= 1e-12 * steps.mean()
    out = np.zeros((n, d), dtype=complex)
    for i in range(d):
        out[:, i] = np.asarray(mittag_leffler(lam[i] * t**a, a), dtype=complex) * x0[i]
        if uniform:
            hh = t[-1] / (n - 1)
            P0, P1 = _primitives(a, lam[i], hh * np.arange(n))
        for j in range(1, n):
            k = np.arange(j)
            if uniform:
                ib, ia = j - k, j - k - 1
                P0b, P0a, P1b, P1a = P0[ib], P0[ia], P1[ib], P1[ia]
                b = hh * ib
            else:
                sig = t[j] - t[: j + 1]
                p0, p1 = _primitives(a, lam[i], sig)
                P0b, P0a, P1b, P1a = p0[:-1], p0[1:], p1[:-1], p1[1:]
                b = sig[:-1]
            dP0 = P0b - P0a
            dP1 = P1b - P1a
            w_next = (b * dP0 - dP1) / steps[:j]
            w_prev = dP0 - w_next
            out[j, i] += w_next @ H[1 : j + 1, i] + w_prev @ H[:j, i]
    imag = float(np.max(np.abs(out.imag))) if n else 0.0
    return Trajectory(t, out.real, meta={"operation": "perron_apply", "max_imag": imag})


# }}}

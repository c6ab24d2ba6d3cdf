"""Power-law decay fits, the no-fast-decay check and scalar separation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from fracdyn.errors import InputError
from fracdyn.report import Report
from fracdyn.solver import CaputoIVP, SolverConfig, Trajectory, solve_ivp

MIN_FIT_NODES = 20
FIT_SAMPLES = 200
NO_FAST_DECAY_MIN_HORIZON = 1e3


@dataclass(frozen=True)
class DecayFit:
    """``|x(t)| ~ m t^(-gamma)`` on ``[t_lo, t_hi]``; ``m = exp(intercept)``."""

    gamma: float
    intercept: float
    rms: float
    t_lo: float
    t_hi: float
    nodes: int

    @property
    def m(self) -> float:
        return math.exp(self.intercept)


def _window(traj: Trajectory, window: Sequence[float] | None) -> tuple[float, float]:
    t = traj.times
    lo, hi = (1.0, float(t[-1])) if window is None else (float(window[0]), float(window[1]))
    if lo < 1.0:
        raise InputError(f"decay windows start at t >= 1, got {lo:g}")
    if not lo < hi:
        raise InputError(f"empty window [{lo:g}, {hi:g}]")
    if hi > t[-1] * (1 + 1e-12) or lo < t[0]:
        raise InputError(f"window [{lo:g}, {hi:g}] leaves the trajectory support [{t[0]:g}, {t[-1]:g}]")
    return lo, min(hi, float(t[-1]))


def fit_decay(traj: Trajectory, window: Sequence[float] | None = None) -> DecayFit:
    """Least-squares slope of ``log|x|`` against ``log t``; ``gamma = -slope``.

    ``log|x|`` is interpolated linearly in ``log t`` onto log-uniform points
    so that densely meshed stretches do not dominate the fit.
    """
    lo, hi = _window(traj, window)
    t = traj.times
    nx = traj.norms()
    inside = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if np.count_nonzero(inside) < MIN_FIT_NODES:
        raise InputError(f"need at least {MIN_FIT_NODES} nodes in the window, got {np.count_nonzero(inside)}")
    # include the bracketing nodes so the interpolation covers the window ends
    k0 = max(int(np.argmax(inside)) - 1, 0)
    k1 = min(int(np.flatnonzero(inside)[-1]) + 2, t.size)
    ts, xs = t[k0:k1], nx[k0:k1]
    ts, xs = ts[ts > 0], xs[ts > 0]
    if np.any(xs <= 0) or not np.all(np.isfinite(xs)):
        raise InputError("states vanish in the fit window")
    lt = np.log(ts)
    grid = np.linspace(math.log(lo), math.log(hi), FIT_SAMPLES)
    ly = np.interp(grid, lt, np.log(xs))
    slope, intercept = np.polyfit(grid, ly, 1)
    rms = float(np.sqrt(np.mean((ly - (slope * grid + intercept)) ** 2)))
    return DecayFit(float(-slope), float(intercept), rms, lo, hi, int(np.count_nonzero(inside)))


def decade_fits(traj: Trajectory, t_lo: float = 1.0) -> list[DecayFit]:
    """Fits over ``[10^k, 10^(k+1)]`` for each full decade above *t_lo*."""
    out = []
    lo = t_lo
    while lo * 10 <= traj.times[-1] * (1 + 1e-12):
        out.append(fit_decay(traj, (lo, min(lo * 10, traj.times[-1]))))
        lo *= 10
    return out


def check_no_fast_decay(
    traj: Trajectory, alpha: float, beta_test: float, window: Sequence[float] | None = None, checkpoints: int = 16
) -> Report:
    """Finite-horizon surrogate for ``limsup t^beta |x(t)| = inf`` when ``beta > alpha``.

    ``t^beta |x|`` on log-spaced checkpoints must grow by at least
    ``(T/t0)^((beta-alpha)/2)`` across the window.
    """
    if not beta_test > alpha:
        raise InputError(f"beta_test must exceed alpha (got beta={beta_test}, alpha={alpha})")
    if traj.times[-1] < NO_FAST_DECAY_MIN_HORIZON:
        raise InputError(f"horizon {traj.times[-1]:g} is below {NO_FAST_DECAY_MIN_HORIZON:g}")
    inputs = {"alpha": alpha, "beta_test": beta_test}
    nx = traj.norms()
    if np.all(nx == 0):
        return Report("check_no_fast_decay", "not_applicable", inputs=inputs, warnings=["trivial trajectory"])
    lo, hi = _window(traj, window if window is not None else (10.0, traj.times[-1]))
    tc = np.geomspace(lo, hi, checkpoints)
    xc = np.interp(tc, traj.times, nx)
    y = tc**beta_test * xc
    required = (hi / lo) ** ((beta_test - alpha) / 2)
    growth = float(y[-1] / y[0]) if y[0] > 0 else math.inf
    ok = growth >= required
    return Report(
        "check_no_fast_decay",
        "pass" if ok else "fail",
        inputs=inputs,
        margins={
            "growth": growth,
            "required": required,
            "log_margin": math.log(growth / required) if growth > 0 else -math.inf,
            "min_step_ratio": float(np.min(y[1:] / y[:-1])),
        },
        grids={"window": [lo, hi], "checkpoints": checkpoints},
    )


# {{{ separation


def _gap(alpha, field, x1, x2, horizon, cfg):
    f = lambda t, x: field(x)  # noqa: E731
    s1 = solve_ivp(CaputoIVP(alpha, f, [x1], horizon, name="separation"), cfg)
    s2 = solve_ivp(CaputoIVP(alpha, f, [x2], horizon, name="separation"), cfg)
    m = min(s1.times.size, s2.times.size)
    gap = s2.states[:m, 0] - s1.states[:m, 0]
    return s1.times[:m], gap, s1, s2


def check_separation(
    alpha: float,
    field: Callable,
    x1: float,
    x2: float,
    horizon: float,
    cfg: SolverConfig | None = None,
    exceptional_points: Sequence[float] = (),
    refine_tol: float = 0.1,
) -> Report:
    """Solve from ``x1 < x2`` on one mesh and report ``min_j (x2(t_j) - x1(t_j))``.

    The solve is repeated with twice as many steps; a relative change of the
    minimum gap above *refine_tol* marks the result unresolved.
    """
    if not x1 < x2:
        raise InputError("need x1 < x2")
    cfg = cfg or SolverConfig()
    t, gap, s1, s2 = _gap(alpha, field, x1, x2, horizon, cfg)
    k = int(np.argmin(gap))
    min_gap = float(gap[k])
    t_fine, gap_fine, *_ = _gap(alpha, field, x1, x2, horizon, replace(cfg, n=2 * cfg.n))
    min_fine = float(gap_fine.min())
    change = abs(min_fine - min_gap) / max(abs(min_fine), 1e-300)
    resolved = change < refine_tol
    warnings = []
    if not resolved:
        warnings.append(f"min gap changed by {100 * change:.1f}% under mesh doubling; unresolved")
    for xe in exceptional_points:
        if x1 == xe or x2 == xe:
            warnings.append(
                f"initial value {xe:g} is a non-Lipschitz point of the field; the solution from it may not be unique"
            )
    if not (s1.completed and s2.completed):
        warnings.append(f"a trajectory stopped early; report truncated to t <= {t[-1]:g}")
    return Report(
        "check_separation",
        "pass" if min_gap > 0 else "fail",
        inputs={"alpha": alpha, "x1": x1, "x2": x2, "horizon": horizon},
        margins={
            "min_gap": min_gap,
            "argmin_time": float(t[k]),
            "min_gap_refined": min_fine,
            "refinement_change": change,
            "resolved": resolved,
        },
        grids={"mesh": cfg.mesh, "n": cfg.n, "n_refined": 2 * cfg.n, "t_end": float(t[-1])},
        tolerances={"refinement": refine_tol},
        warnings=warnings,
    )


# }}}

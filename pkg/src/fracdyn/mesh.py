"""Time meshes starting at 0."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from fracdyn.errors import InputError


def uniform(n: int, horizon: float) -> np.ndarray:
    _check(n, horizon)
    return np.linspace(0.0, horizon, n + 1)


def graded(n: int, horizon: float, exponent: float) -> np.ndarray:
    """``t_j = T (j/n)^r``; ``r = 1/alpha`` clusters nodes where ``t^alpha`` is singular."""
    _check(n, horizon)
    if exponent < 1.0:
        raise InputError(f"grading exponent must be >= 1, got {exponent}")
    t = horizon * (np.arange(n + 1) / n) ** exponent
    t[-1] = horizon
    return t


def geometric(n: int, horizon: float, stretch: float = 1.05) -> np.ndarray:
    """Uniform on ``[0, 1]``, then steps growing by a constant ratio up to *horizon*.

    Half of the intervals go to ``[0, 1]``.  The ratio is solved so the mesh
    ends exactly at *horizon*; if it would exceed *stretch*, more nodes are
    needed and an error is raised.
    """
    _check(n, horizon)
    if stretch <= 1.0:
        raise InputError(f"stretch must exceed 1, got {stretch}")
    if horizon <= 1.0:
        return uniform(n, horizon)
    n1 = max(n // 2, 1)
    m = n - n1
    h0 = 1.0 / n1
    rest = horizon - 1.0
    if m < 1:
        raise InputError("geometric mesh needs at least two intervals")
    if m * h0 >= rest:
        # no stretching needed: keep the step and stop at the horizon
        q = 1.0
    else:
        g = lambda q: h0 * np.expm1(m * np.log(q)) / (q - 1.0) - rest
        hi = stretch
        if g(hi) < 0:
            raise InputError(
                f"{n} intervals cannot reach t={horizon} with stretch {stretch}; increase N"
            )
        q = brentq(g, 1.0 + 1e-14, hi, xtol=1e-15, rtol=1e-15)
    steps = h0 * q ** np.arange(m)
    tail = 1.0 + np.cumsum(steps)
    t = np.concatenate([np.linspace(0.0, 1.0, n1 + 1), tail])
    t = t[t < horizon * (1 - 1e-12)]
    return np.append(t, horizon)


def _check(n: int, horizon: float) -> None:
    if int(n) != n or n < 2:
        raise InputError(f"need N >= 2 intervals, got {n}")
    if not horizon > 0:
        raise InputError(f"horizon must be positive, got {horizon}")

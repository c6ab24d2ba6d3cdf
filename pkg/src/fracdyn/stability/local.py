"""Local structure of a vector field near an equilibrium."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from fracdyn.errors import InputError, NumericError

DEFAULT_SEED = 0


@dataclass(frozen=True)
class Linearization:
    A: np.ndarray
    offset: np.ndarray  # field(x_star); zero at an equilibrium
    x_star: np.ndarray
    field: Callable

    def remainder(self, x) -> np.ndarray:
        """``field(x) - field(x*) - A (x - x*)``; vanishes at ``x*`` by construction."""
        x = np.asarray(x, dtype=float)
        return np.asarray(self.field(x), dtype=float) - self.offset - self.A @ (x - self.x_star)


def _eval(field, x) -> np.ndarray:
    y = np.atleast_1d(np.asarray(field(x), dtype=float))
    if not np.all(np.isfinite(y)):
        raise NumericError(f"field is not finite at {x}")
    return y


def linearize(field: Callable, x_star, fd_step: float = 1e-6, zero_tol: float | None = None) -> Linearization:
    """Central-difference Jacobian of *field* at *x_star* and the remainder split.

    Entries below *zero_tol* (default ``100 * fd_step**2``, the truncation
    level of the difference quotient) are set to 0 so that e.g. ``-x^3``
    linearizes to exactly ``A = 0``.
    """
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    d = x_star.size
    f0 = _eval(field, x_star)
    if f0.size != d:
        raise InputError(f"field returns {f0.size} components for a {d}-dimensional state")
    A = np.empty((d, d))
    for i in range(d):
        h = fd_step * max(1.0, abs(x_star[i]))
        e = np.zeros(d)
        e[i] = h
        A[:, i] = (_eval(field, x_star + e) - _eval(field, x_star - e)) / (2 * h)
    zero_tol = 100 * fd_step**2 if zero_tol is None else zero_tol
    A[np.abs(A) < zero_tol] = 0.0
    return Linearization(A, f0, x_star, field)


def _sobol(dim: int, n: int, seed: int) -> np.ndarray:
    m = max(int(np.ceil(np.log2(n))), 1)
    return qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)[:n]


def ball_points(dim: int, r: float, n: int, seed: int = DEFAULT_SEED, center=None) -> np.ndarray:
    """*n* scrambled-Sobol points, uniformly distributed in the closed ball of radius *r*."""
    if dim == 1:
        u = _sobol(1, n, seed)[:, 0]
        pts = (2 * u - 1)[:, None] * r
    else:
        from scipy.special import ndtri

        u = _sobol(dim + 1, n, seed)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        g = ndtri(u[:, :dim])
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        pts = g * (r * u[:, dim] ** (1.0 / dim))[:, None]
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def lipschitz_modulus(
    field: Callable, r: float, dim: int = 1, samples: int = 1024, seed: int = DEFAULT_SEED, center=None
) -> float:
    """Sampled lower bound for ``sup |f(x) - f(y)| / |x - y|`` over the ball of radius *r*.

    Pairs are drawn from two independent low-discrepancy sets, plus a
    near-diagonal partner for every point so local slopes near the boundary
    are seen.
    """
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")
    if samples < 1000:
        raise InputError("need at least 1000 sample pairs")
    pts = ball_points(dim, r, 2 * samples, seed, center)
    x, y = pts[:samples], pts[samples:]
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    # near pairs: pull each point slightly toward the center, staying in the ball
    near = c + (x - c) * (1 - 1e-4)
    fx = np.array([np.atleast_1d(field(p)) for p in x], dtype=float)
    fy = np.array([np.atleast_1d(field(p)) for p in y], dtype=float)
    fn = np.array([np.atleast_1d(field(p)) for p in near], dtype=float)
    best = 0.0
    for a, fa, b, fb in ((x, fx, y, fy), (x, fx, near, fn)):
        dx = np.linalg.norm(a - b, axis=1)
        ok = dx > 0
        if np.any(ok):
            best = max(best, float(np.max(np.linalg.norm(fa - fb, axis=1)[ok] / dx[ok])))
    return best

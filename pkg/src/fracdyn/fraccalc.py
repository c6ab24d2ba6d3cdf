"""Riemann-Liouville integrals and Caputo derivatives of sampled functions.

Everything here is product integration on a piecewise-linear interpolant of
the samples, on arbitrary strictly increasing meshes starting at 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from fracdyn.errors import InputError

# relative step below which the positive-term series replaces the closed form
_SERIES_SWITCH = 0.05
_SERIES_TERMS = 14


class Kernel(str, enum.Enum):
    INTEGRAL = "integral"
    DERIVATIVE = "derivative"


@dataclass(frozen=True)
class SampledFunction:
    """Samples ``values[j] = v(times[j])``; values are ``(n,)`` or ``(n, d)``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        check_mesh(t)
        if v.shape[0] != t.shape[0]:
            raise InputError(f"got {v.shape[0]} values for {t.shape[0]} times")

    def __len__(self) -> int:
        return self.times.shape[0]


def check_mesh(t: np.ndarray) -> None:
    if t.ndim != 1 or t.size == 0:
        raise InputError("mesh must be a non-empty 1d array")
    if t[0] != 0.0:
        raise InputError(f"mesh must start at 0, got t[0] = {t[0]}")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise InputError("mesh must be strictly increasing")


# {{{ weight rows


def _binom_coeffs(alpha: float, n: int) -> np.ndarray:
    """Coefficients of ``(1 - s)^(alpha - 1) = sum_n c_n s^n`` (all positive)."""
    c = np.empty(n)
    c[0] = 1.0
    for i in range(1, n):
        c[i] = c[i - 1] * (i - alpha) / i
    return c


def _pl_power_moments(alpha: float, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact integrals of ``u^(alpha-1)`` against the two hat pieces on ``[a, b]``.

    Returns ``(w_near, w_far)`` with ``w_near = int_a^b u^(alpha-1) (b-u)/(b-a) du``
    and ``w_far = int_a^b u^(alpha-1) (u-a)/(b-a) du``.  With ``u = t_j - tau``
    these are the weights of the later and earlier sample of the interval.
    For ``s = (b-a)/b`` small both are evaluated from positive-term series
    to avoid the cancellation in the closed form.
    """
    s = (b - a) / b
    ba = b**alpha
    w_near = np.empty_like(b)
    w_far = np.empty_like(b)

    small = s < _SERIES_SWITCH
    if np.any(small):
        ss = s[small]
        c = _binom_coeffs(alpha, _SERIES_TERMS)
        n = np.arange(_SERIES_TERMS)
        # Horner in s for sum c_n s^(n+1)/(n+2) and sum c_n s^(n+1)/((n+1)(n+2))
        acc1 = np.zeros_like(ss)
        acc2 = np.zeros_like(ss)
        for i in reversed(range(_SERIES_TERMS)):
            acc1 = acc1 * ss + c[i] / (n[i] + 2)
            acc2 = acc2 * ss + c[i] / ((n[i] + 1) * (n[i] + 2))
        w_near[small] = ba[small] * ss * acc1
        w_far[small] = ba[small] * ss * acc2

    big = ~small
    if np.any(big):
        aa, bb = a[big], b[big]
        h = bb - aa
        ip = (bb**alpha - aa**alpha) / alpha
        iq = (bb ** (alpha + 1) - aa ** (alpha + 1)) / (alpha + 1)
        w_near[big] = (bb * ip - iq) / h
        w_far[big] = (iq - aa * ip) / h

    return w_near, w_far


def integral_row(t: np.ndarray, j: int, alpha: float) -> np.ndarray:
    """Weights ``w`` with ``I^alpha f(t_j) = sum_k w[k] f(t_k)`` for ``k = 0..j``.

    Exact for piecewise-linear ``f``; includes the ``1/Gamma(alpha)`` factor.
    """
    w = np.zeros(j + 1)
    if j == 0:
        return w
    tj = t[j]
    a = tj - t[1:j + 1]
    b = tj - t[:j]
    # on [t_k, t_{k+1}] with u = t_j - tau: f_{k+1} pairs with (b-u)/h, f_k with (u-a)/h
    w_next, w_prev = _pl_power_moments(alpha, a, b)
    w[1:] += w_next
    w[:-1] += w_prev
    return w / math.gamma(alpha)


def integral_weights_at(t: np.ndarray, j: int, s: float, alpha: float) -> np.ndarray:
    """Weights on ``f_0..f_{j+1}`` for ``I^alpha`` of the piecewise-linear
    interpolant evaluated at an off-grid point ``s`` in ``(t_j, t_{j+1}]``."""
    if not t[j] < s <= t[j + 1]:
        raise InputError(f"s={s} is not inside ({t[j]}, {t[j + 1]}]")
    w = np.zeros(j + 2)
    if j > 0:
        w_next, w_prev = _pl_power_moments(alpha, s - t[1 : j + 1], s - t[:j])
        w[1 : j + 1] += w_next
        w[:j] += w_prev
    e = s - t[j]
    h = t[j + 1] - t[j]
    near = e ** (alpha + 1) / (alpha * (alpha + 1) * h)
    w[j + 1] += near
    w[j] += e**alpha / alpha - near
    return w / math.gamma(alpha)


def rectangle_row(t: np.ndarray, j: int, alpha: float) -> np.ndarray:
    """Left-endpoint product-rectangle weights for ``I^alpha f(t_j)``, ``k = 0..j-1``."""
    if j == 0:
        return np.zeros(0)
    b = t[j] - t[:j]
    return _rect_moments(alpha, b, t[1 : j + 1] - t[:j]) / math.gamma(alpha)


def _rect_moments(alpha: float, b: np.ndarray, h: np.ndarray) -> np.ndarray:
    # (b^alpha - a^alpha)/alpha = b^alpha (1 - (1-s)^alpha)/alpha, computed without cancellation
    s = np.minimum(h / b, 1.0)
    with np.errstate(divide="ignore"):
        return -(b**alpha) * np.expm1(alpha * np.log1p(-s)) / alpha


class RowGenerator:
    """Integral and rectangle rows for one mesh, reusing work on uniform meshes.

    On a uniform mesh every row is a suffix of the last row's per-interval
    moments, so those are computed once.
    """

    def __init__(self, t: np.ndarray, alpha: float) -> None:
        self.t = t
        self.alpha = alpha
        self._g = math.gamma(alpha)
        h = np.diff(t)
        self.uniform = t.size > 2 and np.ptp(h) <= 1e-12 * h.mean()
        if self.uniform:
            hh = h.mean()
            m = np.arange(t.size - 1)  # intervals counted back from the current node
            a, b = m * hh, (m + 1) * hh
            near, far = _pl_power_moments(alpha, a, b)
            # reverse so index k of a row's slice maps to interval [t_k, t_k+1]
            self._near = near[::-1] / self._g
            self._far = far[::-1] / self._g
            self._rect = _rect_moments(alpha, b, np.full_like(b, hh))[::-1] / self._g

    def integral(self, j: int) -> np.ndarray:
        if not self.uniform:
            return integral_row(self.t, j, self.alpha)
        w = np.zeros(j + 1)
        if j:
            n = self._near.size
            w[1:] += self._near[n - j :]
            w[:-1] += self._far[n - j :]
        return w

    def rectangle(self, j: int) -> np.ndarray:
        if not self.uniform:
            return rectangle_row(self.t, j, self.alpha)
        return self._rect[self._rect.size - j :].copy()


def derivative_row(t: np.ndarray, j: int, alpha: float) -> np.ndarray:
    """Weights ``c`` with ``CD^alpha v(t_j) = sum_k c[k] v(t_k)`` for ``j >= 1``.

    Built term by term from

    .. math::

        \\frac{v(t) - v(0)}{\\Gamma(1-\\alpha) t^\\alpha}
        + \\frac{\\alpha}{\\Gamma(1-\\alpha)}
          \\int_0^t \\frac{v(t) - v(\\tau)}{(t-\\tau)^{\\alpha+1}} d\\tau

    with ``v`` piecewise linear; on the last interval ``v(t) - v(tau)``
    vanishes linearly so the integral is finite.
    """
    if j < 1:
        raise InputError("derivative rows need j >= 1; use caputo_derivative at node 0")
    g = math.gamma(1.0 - alpha)
    tj = t[j]
    c = np.zeros(j + 1)
    c[j] += 1.0 / (g * tj**alpha)
    c[0] -= 1.0 / (g * tj**alpha)

    # last interval: (v_j - v_{j-1}) h^-alpha / (1 - alpha)
    h = tj - t[j - 1]
    last = alpha / g * h ** (-alpha) / (1.0 - alpha)
    c[j] += last
    c[j - 1] -= last

    if j >= 2:
        k = np.arange(j - 1)
        a = tj - t[k + 1]
        b = tj - t[k]
        hk = b - a
        # J0 = int_a^b u^(-alpha-1) du, J1 = int_a^b u^(-alpha) du
        J0 = -(a ** (-alpha)) * np.expm1(-alpha * np.log(b / a)) / alpha
        J1 = b ** (1.0 - alpha) * (-np.expm1((1.0 - alpha) * np.log(a / b))) / (1.0 - alpha)
        lin = (b * J0 - J1) / hk
        fac = alpha / g
        c[j] += fac * np.sum(J0)
        np.add.at(c, k, fac * (-J0 + lin))
        np.add.at(c, k + 1, -fac * lin)
    return c


@dataclass(frozen=True)
class QuadratureWeights:
    """Lower-triangular product-integration weights on a fixed mesh.

    Rows are generated on demand; :meth:`table` materializes the dense
    matrix for small meshes.
    """

    mesh: np.ndarray
    alpha: float
    kernel: Kernel
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def row(self, j: int) -> np.ndarray:
        if j not in self._cache:
            if self.kernel is Kernel.INTEGRAL:
                r = integral_row(self.mesh, j, self.alpha)
            else:
                r = derivative_row(self.mesh, j, self.alpha) if j > 0 else np.zeros(1)
            r.setflags(write=False)
            if len(self._cache) < 4096:
                self._cache[j] = r
            return r
        return self._cache[j]

    def table(self) -> np.ndarray:
        n = self.mesh.size
        W = np.zeros((n, n))
        for j in range(n):
            W[j, : j + 1] = self.row(j)
        return W

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        out = np.zeros(values.shape, dtype=np.result_type(values, float))
        for j in range(self.mesh.size):
            out[j] = self.row(j) @ values[: j + 1]
        return out


def convolution_weights(mesh, alpha: float, kernel: Kernel | str = Kernel.INTEGRAL) -> QuadratureWeights:
    mesh = np.asarray(mesh, dtype=float)
    check_mesh(mesh)
    _check_order(alpha)
    return QuadratureWeights(mesh, float(alpha), Kernel(kernel))


# }}}


def _check_order(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")


def rl_integral(f: SampledFunction, alpha: float) -> SampledFunction:
    """Riemann-Liouville integral of order *alpha* at every node of *f*."""
    _check_order(alpha)
    w = convolution_weights(f.times, alpha, Kernel.INTEGRAL)
    return SampledFunction(f.times, w.apply(f.values))


def caputo_derivative(f: SampledFunction, alpha: float, j: int):
    """Caputo derivative of order *alpha* at node *j*.

    At ``j = 0`` the value is ``Gamma(alpha + 1) * gamma`` with
    ``gamma ~ (v(t_1) - v(0)) / t_1^alpha``.
    """
    _check_order(alpha)
    t, v = f.times, f.values
    if not 0 <= j < t.size:
        raise InputError(f"node index {j} out of range for {t.size} nodes")
    if j == 0:
        if t.size < 2:
            raise InputError("need at least two nodes to estimate the derivative at t = 0")
        gamma = (v[1] - v[0]) / t[1] ** alpha
        return math.gamma(alpha + 1.0) * gamma
    return derivative_row(t, j, alpha) @ v[: j + 1]


def caputo_derivative_all(f: SampledFunction, alpha: float) -> np.ndarray:
    """Caputo derivative at every node (node 0 via the limit estimate)."""
    out = np.zeros(f.values.shape, dtype=np.result_type(f.values, float))
    for j in range(len(f)):
        out[j] = caputo_derivative(f, alpha, j)
    return out

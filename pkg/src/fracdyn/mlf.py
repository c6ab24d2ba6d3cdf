"""Mittag-Leffler function :math:`E_{\\alpha,\\beta}` for scalar and matrix arguments.

Three evaluation regions are used:

* ``series``: the defining Taylor series, summed with a compensated sum,
  for :math:`|z| \\le 5` whenever its rounding estimate meets the target;
* ``asymptotic``: the large-:math:`|z|` expansion truncated at its smallest
  term for :math:`|z| \\ge 14`, again only when the truncation estimate
  meets the target;
* ``contour``: inversion of the Laplace transform
  :math:`s^{\\alpha-\\beta}/(s^\\alpha - z)` on an optimal parabolic contour
  (Garrappa, SIAM J. Numer. Anal. 53, 2015) for everything else.

Errors are reported in the mixed measure ``|error| / max(1, |E|)``.
"""

from __future__ import annotations

import enum
import cmath
import math
from dataclasses import dataclass

import numpy as np

from fracdyn.errors import InputError, MLAccuracyError

SERIES_RADIUS = 5.0
ASYMPTOTIC_RADIUS = 14.0
EIGVEC_COND_MAX = 1e8

_EPS = np.finfo(float).eps
_LOG_EPS = math.log(_EPS)
# accuracy requested from the contour quadrature
_CONTOUR_EPS = 1e-15
# region acceptance is relative, with this safety factor on tol
_REGION_SAFETY = 1e-2


class Region(str, enum.Enum):
    SERIES = "series"
    ASYMPTOTIC = "asymptotic"
    CONTOUR = "contour"


@dataclass(frozen=True)
class MLEvalRequest:
    alpha: float
    beta: float
    z: complex
    tol: float = 1e-10

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 2.0):
            raise InputError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.beta > 0.0:
            raise InputError(f"beta must be positive, got {self.beta}")
        if not (0.0 < self.tol <= 1e-4):
            raise InputError(f"tol must lie in (0, 1e-4], got {self.tol}")
        if not np.isfinite(self.z):
            raise InputError(f"z must be finite, got {self.z}")


@dataclass(frozen=True)
class MLEvalResult:
    value: complex
    region: Region
    est_error: float


@dataclass(frozen=True)
class MatrixMLRequest:
    alpha: float
    beta: float
    A: np.ndarray
    t: float
    tol: float = 1e-8

    def __post_init__(self) -> None:
        A = np.asarray(self.A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError(f"A must be square, got shape {A.shape}")
        if self.t < 0:
            raise InputError(f"t must be non-negative, got {self.t}")
        MLEvalRequest(self.alpha, self.beta, 0.0, min(self.tol, 1e-4))


# {{{ gamma helpers


def rgamma(x: float) -> float:
    """Reciprocal gamma function, zero at the poles of :math:`\\Gamma`."""
    if x <= 0 and x == math.floor(x):
        return 0.0
    if x > 170.0:
        return math.exp(-math.lgamma(x))
    if x < -170.0:
        # reflection: 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi
        sgn = math.sin(math.pi * x)
        return math.copysign(math.exp(math.lgamma(1.0 - x) + math.log(abs(sgn) / math.pi)), sgn)
    return 1.0 / math.gamma(x)


def _log_abs_gamma(x: float) -> float:
    return math.lgamma(x)


def _log_rgamma(x: float) -> tuple[float, float]:
    """``(log|1/Gamma(x)|, sign)``; sign is 0 at the poles."""
    if x <= 0 and x == math.floor(x):
        return -math.inf, 0.0
    if x > 0:
        return -math.lgamma(x), 1.0
    s = math.sin(math.pi * x)
    return math.lgamma(1.0 - x) + math.log(abs(s) / math.pi), math.copysign(1.0, s)


# }}}


# {{{ series


def _series(alpha: float, beta: float, z: complex) -> tuple[complex, float]:
    """Sum the Taylor series; returns ``(value, absolute error estimate)``."""
    if z == 0:
        return complex(rgamma(beta)), 0.0

    logz = cmath.log(z)
    absz = abs(z)
    re_terms: list[float] = []
    im_terms: list[float] = []
    abs_sum = 0.0
    k = 0
    peaked = False
    prev = math.inf
    while True:
        arg = alpha * k + beta
        logmag = k * math.log(absz) - _log_abs_gamma(arg)
        if logmag > 700.0:
            return complex(np.nan), math.inf
        mag = math.exp(logmag) if logmag > -745.0 else 0.0
        if mag > 0.0:
            term = cmath.exp(k * logz - _log_abs_gamma(arg))
            re_terms.append(term.real)
            im_terms.append(term.imag)
            abs_sum += mag

        if mag < prev:
            peaked = True
        prev = mag
        k += 1
        # terms decrease monotonically past the peak, so the tail is geometric
        if peaked and k > 2:
            ratio = absz * math.exp(_log_abs_gamma(arg) - _log_abs_gamma(arg + alpha))
            if ratio < 1.0 and mag * ratio / (1.0 - ratio) <= _EPS * max(abs_sum, 1e-300):
                tail = mag * ratio / (1.0 - ratio)
                break
        if k > 5000:
            tail = math.inf
            break

    value = complex(math.fsum(re_terms), math.fsum(im_terms))
    # each term carries a few ulps from exp/lgamma, amplified by k |log z|
    rounding = 4.0 * _EPS * abs_sum * (1.0 + k * _EPS + abs(logz) * 2.0)
    return value, rounding + tail


# }}}


def _peak_term(alpha: float, beta: float, absz: float) -> float:
    """Largest ``|z|^k / Gamma(alpha k + beta)``; a large peak means cancellation for Re z < 0."""
    lz = math.log(absz)
    best = -math.inf
    for k in range(0, 5000):
        lm = k * lz - math.lgamma(alpha * k + beta)
        if lm < best and k > 2:
            break
        best = max(best, lm)
    return math.exp(min(best, 700.0))


# }}}


# {{{ asymptotic expansion


def _principal_poles(alpha: float, z: complex) -> tuple[np.ndarray, bool]:
    """Poles :math:`s^\\alpha = z` in the principal sheet ``|arg s| < pi``.

    The flag is ``True`` when some pole sits on (or next to) the branch cut,
    where neither the expansion nor the residue bookkeeping is reliable.
    """
    theta = math.atan2(z.imag, z.real)
    kmin = math.ceil(-alpha / 2 - theta / (2 * math.pi))
    kmax = math.floor(alpha / 2 - theta / (2 * math.pi))
    r = abs(z) ** (1.0 / alpha)
    poles = []
    on_cut = False
    for k in range(kmin - 1, kmax + 2):
        phase = theta + 2 * math.pi * k
        if abs(abs(phase) - alpha * math.pi) < 1e-8:
            on_cut = True
        if abs(phase) < alpha * math.pi:
            poles.append(r * np.exp(1j * phase / alpha))
    return np.array(poles, dtype=complex), on_cut


def _asymptotic(alpha: float, beta: float, z: complex) -> tuple[complex, float]:
    poles, on_cut = _principal_poles(alpha, z)
    if on_cut:
        return complex(np.nan), math.inf

    exp_part = complex(np.sum(poles ** (1.0 - beta) * np.exp(poles)) / alpha)

    # |1/Gamma(beta - alpha k)| <= Gamma(alpha k + 1 - beta) / pi, so the
    # envelope bounds the terms.  Sum until the envelope is negligible, or stop
    # at its minimum (smallest term) when the expansion cannot get that far.
    logz = cmath.log(z)
    log_absz = math.log(abs(z))
    re_terms: list[float] = []
    im_terms: list[float] = []
    scale = abs(exp_part)
    prev_env = math.inf
    trunc = math.inf
    for k in range(1, 4000):
        x = alpha * k + 1.0 - beta
        env = math.exp((math.lgamma(x) if x > 0 else 0.0) - k * log_absz) / math.pi
        if env > prev_env:
            # past the smallest term: the previous envelope bounds the error
            trunc = prev_env
            break
        prev_env = env
        lg, sgn = _log_rgamma(beta - alpha * k)
        if sgn != 0.0:
            term = sgn * cmath.exp(lg - k * logz)
            re_terms.append(term.real)
            im_terms.append(term.imag)
            scale += abs(term)
        if env <= 1e-3 * _EPS * max(scale, 1e-300):
            trunc = env
            break

    algebraic = -complex(math.fsum(re_terms), math.fsum(im_terms))
    value = exp_part + algebraic
    return value, trunc + 4.0 * _EPS * scale


# }}}


# {{{ optimal parabolic contour


def _optimal_param_rb(phi_j, phi_j1, pj, qj, log_epsilon):
    fac = 1.01
    f_max = math.exp(log_epsilon - _LOG_EPS)

    sq_phi_j = math.sqrt(phi_j)
    threshold = 2.0 * math.sqrt(log_epsilon - _LOG_EPS)
    sq_phi_j1 = min(math.sqrt(phi_j1), threshold - sq_phi_j)

    f_bar = None
    if pj < 1e-14 and qj < 1e-14:
        sq_bar_j, sq_bar_j1 = sq_phi_j, sq_phi_j1
        f_bar = 1.0
    elif pj < 1e-14:
        sq_bar_j = sq_phi_j
        if sq_phi_j > 0:
            f_min = fac * (sq_phi_j / (sq_phi_j1 - sq_phi_j)) ** qj
        else:
            f_min = fac
        if f_min < f_max:
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fq = f_bar ** (-1.0 / qj)
            sq_bar_j1 = (2.0 * sq_phi_j1 - fq * sq_phi_j) / (2.0 + fq)
    elif qj < 1e-14:
        sq_bar_j1 = sq_phi_j1
        f_min = fac * (sq_phi_j1 / (sq_phi_j1 - sq_phi_j)) ** pj
        if f_min < f_max:
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / pj)
            sq_bar_j = (2.0 * sq_phi_j + fp * sq_phi_j1) / (2.0 - fp)
    else:
        f_min = fac * (sq_phi_j + sq_phi_j1) / (sq_phi_j1 - sq_phi_j) ** max(pj, qj)
        if f_min < f_max:
            f_min = max(f_min, 1.5)
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / pj)
            fq = f_bar ** (-1.0 / qj)
            w = -phi_j1 / log_epsilon
            den = 2.0 + w - (1.0 + w) * fp + fq
            sq_bar_j = ((2.0 + w + fq) * sq_phi_j + fp * sq_phi_j1) / den
            sq_bar_j1 = (-(1.0 + w) * fq * sq_phi_j + (2.0 + w - (1.0 + w) * fp) * sq_phi_j1) / den

    if f_bar is None:
        return 0.0, 0.0, math.inf

    log_epsilon = log_epsilon - math.log(f_bar)
    w = -(sq_bar_j1**2) / log_epsilon
    mu = (((1.0 + w) * sq_bar_j + sq_bar_j1) / (2.0 + w)) ** 2
    h = (
        -2.0 * math.pi / log_epsilon * (sq_bar_j1 - sq_bar_j)
        / ((1.0 + w) * sq_bar_j + sq_bar_j1)
    )
    if not (mu > 0 and h > 0):
        return 0.0, 0.0, math.inf
    N = math.ceil(math.sqrt(1.0 - log_epsilon / mu) / h)
    return mu, h, N


def _optimal_param_ru(phi_j, pj, log_epsilon):
    sq_phi_j = math.sqrt(phi_j)
    phibar = phi_j * 1.01 if phi_j > 0 else 0.01
    sq_phibar = math.sqrt(phibar)

    f_min, f_max, f_tar = 1.0, 10.0, 5.0
    for _ in range(100):
        log_eps_phi = log_epsilon / phibar
        N = math.ceil(phibar / math.pi * (1.0 - 1.5 * log_eps_phi + math.sqrt(1.0 - 2.0 * log_eps_phi)))
        A = math.pi * N / phibar
        sq_mu = sq_phibar * abs(4.0 - A) / abs(7.0 - math.sqrt(1.0 + 12.0 * A))
        fbar = ((sq_phibar - sq_phi_j) / sq_mu) ** (-pj)
        if pj < 1e-14 or f_min < fbar < f_max:
            break
        sq_phibar = f_tar ** (-1.0 / pj) * sq_mu + sq_phi_j
        phibar = sq_phibar**2
    mu = sq_mu**2
    h = (-3.0 * A - 2.0 + 2.0 * math.sqrt(1.0 + 12.0 * A)) / (4.0 - A) / N

    threshold = log_epsilon - _LOG_EPS
    if mu > threshold:
        Q = 0.0 if abs(pj) < 1e-14 else f_tar ** (-1.0 / pj) * math.sqrt(mu)
        phibar = (Q + sq_phi_j) ** 2
        if phibar < threshold:
            w = math.sqrt(_LOG_EPS / (_LOG_EPS - log_epsilon))
            u = math.sqrt(-phibar / _LOG_EPS)
            mu = threshold
            N = math.ceil(w * log_epsilon / (2.0 * math.pi * (u * w - 1.0)))
            h = math.sqrt(_LOG_EPS / (_LOG_EPS - log_epsilon)) / N
        else:
            return 0.0, 0.0, math.inf
    return mu, h, N


def _contour(alpha: float, beta: float, z: complex) -> tuple[complex, float]:
    log_epsilon = math.log(_CONTOUR_EPS)

    theta = math.atan2(z.imag, z.real)
    kmin = math.ceil(-alpha / 2.0 - theta / (2.0 * math.pi))
    kmax = math.floor(alpha / 2.0 - theta / (2.0 * math.pi))
    k = np.arange(kmin, kmax + 1)
    s_star = abs(z) ** (1.0 / alpha) * np.exp(1j * (theta + 2.0 * np.pi * k) / alpha)

    phi = (s_star.real + np.abs(s_star)) / 2.0
    order = np.argsort(phi, kind="stable")
    phi = phi[order]
    s_star = s_star[order]
    keep = phi > 1e-15
    s_star = np.concatenate([[0.0], s_star[keep]])
    phi = np.concatenate([[0.0], phi[keep]])
    J1 = len(s_star)

    p = np.concatenate([[max(0.0, -2.0 * (alpha - beta + 1.0))], np.ones(J1 - 1)])
    q = np.concatenate([np.ones(J1 - 1), [np.inf]])
    phi = np.concatenate([phi, [np.inf]])

    admissible = np.nonzero(
        (phi[:-1] < (log_epsilon - _LOG_EPS)) & (phi[:-1] < phi[1:])
    )[0]

    while True:
        params = []
        for j1 in admissible:
            if j1 < J1 - 1:
                params.append(_optimal_param_rb(phi[j1], phi[j1 + 1], p[j1], q[j1], log_epsilon))
            else:
                params.append(_optimal_param_ru(phi[j1], p[j1], log_epsilon))
        Ns = [prm[2] for prm in params]
        if min(Ns) > 200:
            log_epsilon += math.log(10.0)
        else:
            break

    i_best = int(np.argmin(Ns))
    mu, h, N = params[i_best]
    j_best = admissible[i_best]

    u = h * np.arange(-N, N + 1)
    s = mu * (1j * u + 1.0) ** 2
    ds = -2.0 * mu * u + 2.0 * mu * 1j
    F = s ** (alpha - beta) / (s**alpha - z) * ds
    S = np.exp(s) * F
    integral = h * np.sum(S) / (2.0j * np.pi)

    poles = s_star[j_best + 1:]
    residues = poles ** (1.0 - beta) * np.exp(poles) / alpha
    value = complex(integral + np.sum(residues))

    roundoff = _EPS * (h * float(np.sum(np.abs(S))) / (2.0 * np.pi) + float(np.sum(np.abs(residues))))
    target = math.exp(log_epsilon) * max(1.0, abs(value))
    return value, 10.0 * roundoff + target


# }}}


# {{{ public api


def ml_scalar(req: MLEvalRequest) -> MLEvalResult:
    """Evaluate :math:`E_{\\alpha,\\beta}(z)` to the accuracy requested in *req*.

    Raises :class:`~fracdyn.errors.MLAccuracyError` (carrying the best
    estimate) when the final error estimate exceeds ``req.tol``.
    """
    alpha, beta, tol = float(req.alpha), float(req.beta), float(req.tol)
    z = complex(req.z)

    if z == 0:
        return MLEvalResult(complex(rgamma(beta)), Region.SERIES, 0.0)

    absz = abs(z)
    candidates: list[tuple[complex, float, Region]] = []
    if absz <= SERIES_RADIUS and not (z.real < 0 and _peak_term(alpha, beta, absz) > 1e2):
        value, err = _series(alpha, beta, z)
        candidates.append((value, err, Region.SERIES))
        if np.isfinite(value) and err <= _REGION_SAFETY * tol * abs(value):
            return _finish(value, err, Region.SERIES, tol, z)
    elif absz >= ASYMPTOTIC_RADIUS:
        value, err = _asymptotic(alpha, beta, z)
        if np.isfinite(value):
            candidates.append((value, err, Region.ASYMPTOTIC))
            if err <= _REGION_SAFETY * tol * abs(value):
                return _finish(value, err, Region.ASYMPTOTIC, tol, z)

    with np.errstate(over="ignore", invalid="ignore"):
        value, err = _contour(alpha, beta, z)
    candidates.append((value, err, Region.CONTOUR))
    finite = [c for c in candidates if np.isfinite(c[0])]
    if not finite:
        raise MLAccuracyError(f"E(z) at z={z} overflows double precision", value=complex(math.inf), est_error=math.inf)
    value, err, region = min(finite, key=lambda c: c[1] / max(1.0, abs(c[0])))
    return _finish(value, err, region, tol, z)


def _finish(value: complex, err: float, region: Region, tol: float, z: complex) -> MLEvalResult:
    est = err / max(1.0, abs(value))
    if not np.isfinite(value) or est > tol:
        raise MLAccuracyError(
            f"E(z) at z={z} not resolved to tol={tol:g} (estimate {est:.3e})",
            value=value,
            est_error=est,
        )
    return MLEvalResult(value, region, est)


def mittag_leffler(z, alpha: float, beta: float = 1.0, tol: float = 1e-10):
    """Evaluate :math:`E_{\\alpha,\\beta}` elementwise.

    Real input gives real output; scalars give scalars.
    """
    zarr = np.asarray(z)
    is_real = not np.iscomplexobj(zarr)
    flat = zarr.ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, zi in enumerate(flat):
        out[i] = ml_scalar(MLEvalRequest(alpha, beta, complex(zi), tol)).value
    out = out.reshape(zarr.shape)
    if is_real:
        out = out.real
    if out.ndim == 0:
        return out.item()
    return out


def ml_matrix(req: MatrixMLRequest) -> np.ndarray:
    """Evaluate :math:`E_{\\alpha,\\beta}(t^\\alpha A)`.

    Diagonalizable matrices (eigenvector condition number below
    :data:`EIGVEC_COND_MAX`) go through the eigendecomposition, as long as the
    condition number times the scalar errors stays within ``tol``; anything
    else falls back to the truncated power series with a norm-based remainder
    bound.
    """
    A = np.asarray(req.A)
    d = A.shape[0]
    is_real = not np.iscomplexobj(A)
    alpha, beta, tol = req.alpha, req.beta, req.tol
    scalar_tol = min(tol, 1e-4)

    if req.t == 0.0 or not np.any(A):
        return np.eye(d) * rgamma(beta)

    M = req.t**alpha * A.astype(complex)
    lam, S = np.linalg.eig(M)
    cond = np.linalg.cond(S)
    out = None
    if np.isfinite(cond) and cond <= EIGVEC_COND_MAX:
        res = [ml_scalar(MLEvalRequest(alpha, beta, li, scalar_tol)) for li in lam]
        e = np.array([r.value for r in res])
        out = (S * e) @ np.linalg.inv(S)
        # scalar errors are amplified by the eigenvector condition number
        err = cond * max(max(r.est_error * max(1.0, abs(r.value)) for r in res), _EPS * np.max(np.abs(e)))
        if err > tol * max(1.0, np.linalg.norm(out, 2)):
            try:
                out = _matrix_series(alpha, beta, M, tol, cond)
            except MLAccuracyError as exc:
                if exc.est_error < err / max(1.0, np.linalg.norm(out, 2)):
                    raise
                raise MLAccuracyError(
                    f"matrix Mittag-Leffler: eigenvector condition {cond:.3e} amplifies the "
                    f"scalar errors to {err:.3e}, above tol={tol:g}",
                    value=out,
                    est_error=err / max(1.0, np.linalg.norm(out, 2)),
                ) from None
    else:
        out = _matrix_series(alpha, beta, M, tol, cond)

    if is_real:
        out = out.real
    return out


def _matrix_series(alpha, beta, M, tol, cond) -> np.ndarray:
    d = M.shape[0]
    normM = np.linalg.norm(M, 2)
    out = np.eye(d, dtype=complex) * rgamma(beta)
    power = np.eye(d, dtype=complex)
    abs_scale = abs(rgamma(beta))
    for k in range(1, 5000):
        power = power @ M
        c = rgamma(alpha * k + beta)
        out = out + power * c
        bound_k = normM**k * abs(c)
        abs_scale += bound_k
        ratio = normM * math.exp(math.lgamma(alpha * k + beta) - math.lgamma(alpha * k + alpha + beta))
        if ratio < 1.0:
            tail = bound_k * ratio / (1.0 - ratio)
            if tail <= _EPS * max(1.0, np.linalg.norm(out, 2)):
                break
    else:
        tail = math.inf

    scale = max(1.0, np.linalg.norm(out, 2))
    err = tail + 4.0 * _EPS * abs_scale * (1.0 + k * _EPS)
    if err > tol * scale:
        raise MLAccuracyError(
            f"matrix Mittag-Leffler: eigenvector condition {cond:.3e} above "
            f"{EIGVEC_COND_MAX:g} and series error {err / scale:.3e} above tol={tol:g}",
            value=out,
            est_error=err / scale,
        )
    return out


def ml_matrix_eval(alpha: float, beta: float, A, t: float, tol: float = 1e-8) -> np.ndarray:
    return ml_matrix(MatrixMLRequest(alpha, beta, np.asarray(A), float(t), tol))


# }}}

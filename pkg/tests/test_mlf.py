from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from fracdyn.errors import InputError, MLAccuracyError
from fracdyn.mlf import (
    ASYMPTOTIC_RADIUS,
    SERIES_RADIUS,
    MatrixMLRequest,
    MLEvalRequest,
    Region,
    mittag_leffler,
    ml_matrix,
    ml_matrix_eval,
    ml_scalar,
    rgamma,
)

import oracles


def ml(alpha, beta, z, tol=1e-10):
    return ml_scalar(MLEvalRequest(alpha, beta, z, tol))


@pytest.mark.parametrize("z", [0.5, -1.0, 3.0, -7.5, 12.0, -20.0, 2 + 3j, -15 + 1j])
def test_exponential_case(z):
    # accuracy is relative to max(1, |E|): exponentially small values are only absolutely accurate
    assert oracles.mixed_error(ml(1.0, 1.0, z).value, np.exp(z)) <= 1e-12


@pytest.mark.parametrize("z", [0.3, -2.0, 6.0, -9.0, -30.0])
def test_beta_two_is_expm1_over_z(z):
    assert oracles.mixed_error(ml(1.0, 2.0, z).value, math.expm1(z) / z) <= 1e-12


@pytest.mark.parametrize("x", [0.01, 0.5, 2.0, 6.0, 20.0, 100.0])
def test_half_order_against_erfcx(x):
    assert oracles.rel_error(ml(0.5, 1.0, -x).value, oracles.ml_half(x)) <= 1e-12


def test_alpha_two_is_cosh():
    for x in (0.5, 2.0, 4.0):
        assert oracles.rel_error(ml(1.999999, 1.0, x * x).value, math.cosh(x)) <= 1e-5


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.9, 0.99])
@pytest.mark.parametrize("x", [0.5, 3.0, 14.0, 200.0])
def test_negative_real_axis_against_spectral_integral(alpha, x):
    assert oracles.rel_error(ml(alpha, 1.0, -x).value, oracles.ml_negative_real(alpha, x)) <= 1e-11


@pytest.mark.parametrize(
    "alpha,beta,z",
    [
        (0.3, 1.0, 2.0 + 1.0j),
        (0.7, 0.4, -3.0 + 4.0j),
        (0.5, 1.5, 4.5j),
        (0.8, 2.0, -4.9),
        (0.6, 0.6, 1.0 - 2.0j),
        (0.9, 1.0, 8.0 + 3.0j),
        (0.4, 1.2, -9.0 - 1.0j),
        (0.75, 1.0, 10.0 * np.exp(0.6j)),
    ],
)
def test_against_extended_precision_series(alpha, beta, z):
    assert oracles.mixed_error(ml(alpha, beta, z).value, oracles.ml_series(alpha, beta, z)) <= 1e-11


def test_zero_argument():
    for beta in (0.5, 1.0, 2.0, 3.5):
        assert ml(0.7, beta, 0).value == pytest.approx(1 / math.gamma(beta), rel=1e-15)
    # ml --alpha 0.5 --beta 2 --z 0
    assert ml(0.5, 2.0, 0).value == 1.0


def test_region_selection():
    assert ml(0.6, 1.0, 1.0).region is Region.SERIES
    assert ml(0.6, 1.0, -(SERIES_RADIUS + 3)).region is Region.CONTOUR
    assert ml(0.6, 1.0, -(ASYMPTOTIC_RADIUS + 10)).region is Region.ASYMPTOTIC


def test_error_estimate_is_honest():
    for alpha, beta, z in [(0.5, 1.0, -3.0), (0.8, 1.2, 9.0 + 2j), (0.3, 1.0, -40.0)]:
        res = ml(alpha, beta, z)
        ref = oracles.ml_series(alpha, beta, z) if abs(z) < 20 else oracles.ml_negative_real(alpha, -z.real)
        assert oracles.mixed_error(res.value, ref) <= max(10 * res.est_error, 1e-14)


def test_overflow_raises():
    # E_0.1(2) is about 10 exp(2^10), far beyond double precision
    with pytest.raises(MLAccuracyError, match="overflow"):
        ml(0.1015625, 1.0, 2 + 0.125j)


def test_unreachable_tolerance_raises_with_estimate():
    with pytest.raises(MLAccuracyError) as info:
        ml(0.5, 1.0, -8.0, tol=1e-18)
    assert info.value.value == pytest.approx(oracles.ml_half(8.0), rel=1e-10)
    assert info.value.est_error > 1e-18


@pytest.mark.parametrize(
    "alpha,beta,z,tol", [(0.0, 1.0, 1.0, 1e-10), (2.5, 1.0, 1.0, 1e-10), (0.5, -1.0, 1.0, 1e-10), (0.5, 1.0, np.inf, 1e-10), (0.5, 1.0, 1.0, 0.1)]
)
def test_invalid_requests(alpha, beta, z, tol):
    with pytest.raises(InputError):
        MLEvalRequest(alpha, beta, z, tol)


def test_vectorized_real_in_real_out():
    z = np.linspace(-20, 5, 11)
    out = mittag_leffler(z, 0.5)
    assert out.dtype == float and out.shape == z.shape
    assert isinstance(mittag_leffler(-1.0, 0.5), float)
    assert np.iscomplexobj(mittag_leffler(np.array([1j]), 0.5))


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(0.15, 0.95),
    beta=st.floats(0.3, 2.5),
    r=st.floats(0.0, 30.0),
    theta=st.floats(-math.pi, math.pi),
)
def test_recurrence_property(alpha, beta, r, theta):
    if r ** (1 / alpha) > 600:
        r = 600**alpha
    z = r * complex(math.cos(theta), math.sin(theta))
    e1 = ml(alpha, beta, z).value
    e2 = ml(alpha, alpha + beta, z).value
    scale = max(abs(e1), abs(rgamma(beta)), abs(z * e2), 1e-300)
    assert abs(e1 - rgamma(beta) - z * e2) / scale <= 1e-9


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.1, 0.99), x=st.floats(0.0, 50.0))
def test_completely_monotone_on_negative_axis(alpha, x):
    # E_alpha(-x) lies in (0, 1] and decreases in x
    a = ml(alpha, 1.0, -x).value.real
    b = ml(alpha, 1.0, -(x + 0.5)).value.real
    assert 0 < b <= a <= 1 + 1e-14


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.1, 0.99), beta=st.floats(0.2, 3.0), re=st.floats(-20, 4), im=st.floats(0.1, 20))
def test_conjugate_symmetry(alpha, beta, re, im):
    z = complex(re, im)
    if abs(z) ** (1 / alpha) > 600:
        z *= 600**alpha / abs(z)
    a, b = ml(alpha, beta, z).value, ml(alpha, beta, z.conjugate()).value
    assert abs(a - b.conjugate()) <= 1e-9 * max(1.0, abs(a))


# {{{ matrix


def test_matrix_exponential_case():
    A = np.array([[-1.0, 2.0], [0.5, -3.0]])
    for t in (0.3, 1.0, 2.0):
        E = ml_matrix_eval(1.0, 1.0, A, t)
        assert np.allclose(E, expm(t * A), rtol=1e-10, atol=1e-12)


def test_matrix_diagonal_matches_scalar():
    lam = np.array([-1.0, -0.3, -4.0])
    E = ml_matrix_eval(0.6, 1.0, np.diag(lam), 2.0)
    ref = [ml(0.6, 1.0, l * 2.0**0.6).value.real for l in lam]
    assert np.allclose(np.diag(E), ref, rtol=1e-12)
    assert np.allclose(E - np.diag(np.diag(E)), 0, atol=1e-15)


def test_matrix_similarity_invariance():
    rng = np.random.default_rng(0)
    S = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    D = np.diag([-1.0, -2.0, -0.5])
    A = S @ D @ np.linalg.inv(S)
    E = ml_matrix_eval(0.7, 1.0, A, 1.5)
    ref = S @ ml_matrix_eval(0.7, 1.0, D, 1.5) @ np.linalg.inv(S)
    assert np.allclose(E, ref, rtol=1e-9, atol=1e-11)


def test_matrix_jordan_block_uses_series():
    # defective matrix: E(tA) for A = [[l, 1], [0, l]] has off-diagonal d/dl E_{a}(l t^a) * t^a
    lam, a, t = -0.5, 0.5, 1.0
    E = ml_matrix(MatrixMLRequest(a, 1.0, np.array([[lam, 1.0], [0.0, lam]]), t))
    assert E[0, 0] == pytest.approx(ml(a, 1.0, lam).value.real, rel=1e-12)
    # E_a'(z) = (E_{a,a}(z) - (a-1) E_{a,a+... }) is awkward; use a central difference instead
    h = 1e-5
    deriv = (ml(a, 1.0, lam + h).value.real - ml(a, 1.0, lam - h).value.real) / (2 * h)
    assert E[0, 1] == pytest.approx(deriv, rel=1e-8)


def test_matrix_nearly_defective():
    # double eigenvalue -1.5: the computed eigenvectors are almost parallel
    A = np.array([[-1.0, 0.5], [-0.5, -2.0]])
    for t in (1.5, 2.5, 3.0):
        E = ml_matrix_eval(0.6, 1.0, A, t)
        assert np.max(np.abs(E - oracles.ml_matrix_series(0.6, 1.0, A, t))) <= 1e-10


def test_matrix_zero_time():
    E = ml_matrix_eval(0.5, 2.0, np.array([[1.0, 2.0], [3.0, 4.0]]), 0.0)
    assert np.array_equal(E, np.eye(2))


def test_matrix_rejects_bad_shape():
    with pytest.raises(InputError):
        ml_matrix_eval(0.5, 1.0, np.ones((2, 3)), 1.0)
    with pytest.raises(InputError):
        ml_matrix_eval(0.5, 1.0, np.eye(2), -1.0)


# }}}

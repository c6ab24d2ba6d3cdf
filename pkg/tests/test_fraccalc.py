from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdyn import mesh
from fracdyn.errors import InputError
from fracdyn.fields import explicit_zero_solution
from fracdyn.fraccalc import (
    Kernel,
    RowGenerator,
    SampledFunction,
    caputo_derivative,
    caputo_derivative_all,
    convolution_weights,
    integral_row,
    integral_weights_at,
    rectangle_row,
    rl_integral,
)
from fracdyn.mlf import mittag_leffler

import oracles


def random_mesh(draw_sizes, horizon=2.0):
    h = np.asarray(draw_sizes, dtype=float)
    return np.concatenate([[0.0], np.cumsum(h / h.sum() * horizon)])


meshes = st.lists(st.floats(0.05, 1.0), min_size=2, max_size=40).map(random_mesh)


def test_rl_of_constant():
    t = mesh.uniform(50, 3.0)
    out = rl_integral(SampledFunction(t, np.ones_like(t)), 0.5).values
    assert np.allclose(out, t**0.5 / math.gamma(1.5), rtol=1e-13, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(t=meshes, alpha=st.floats(0.05, 0.95), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_rl_exact_for_linear_on_any_mesh(t, alpha, a, b):
    out = rl_integral(SampledFunction(t, a * t + b), alpha).values
    ref = a * t ** (1 + alpha) / math.gamma(2 + alpha) + b * t**alpha / math.gamma(1 + alpha)
    assert np.allclose(out, ref, rtol=1e-11, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(t=meshes, alpha=st.floats(0.05, 0.95), seed=st.integers(0, 2**16))
def test_rl_is_linear_and_positive(t, alpha, seed):
    rng = np.random.default_rng(seed)
    f, g = rng.random(t.size), rng.random(t.size)
    If = rl_integral(SampledFunction(t, f), alpha).values
    Ig = rl_integral(SampledFunction(t, g), alpha).values
    Ifg = rl_integral(SampledFunction(t, 2 * f - 3 * g), alpha).values
    assert np.allclose(Ifg, 2 * If - 3 * Ig, atol=1e-12)
    assert np.all(If >= 0)


def test_uniform_row_one_weights():
    alpha, h = 0.4, 0.3
    t = np.array([0.0, h, 2 * h])
    w = integral_row(t, 1, alpha)
    scale = h**alpha / math.gamma(alpha + 2)
    assert w == pytest.approx([alpha * scale, scale], rel=1e-14)


def test_weight_table_matches_rows_and_generator():
    t = mesh.uniform(30, 1.0)
    W = convolution_weights(t, 0.7).table()
    gen = RowGenerator(t, 0.7)
    assert gen.uniform
    for j in (1, 5, 30):
        assert np.allclose(W[j, : j + 1], integral_row(t, j, 0.7), rtol=1e-13)
        assert np.allclose(gen.integral(j), integral_row(t, j, 0.7), rtol=1e-12)
        assert np.allclose(gen.rectangle(j), rectangle_row(t, j, 0.7), rtol=1e-12)
    assert np.all(np.triu(W, 1) == 0)


def test_rectangle_row_exact_for_constant():
    t = mesh.graded(40, 2.0, 2.0)
    for j in (1, 17, 40):
        assert rectangle_row(t, j, 0.3).sum() == pytest.approx(t[j] ** 0.3 / math.gamma(1.3), rel=1e-13)


def test_off_grid_weights():
    t = mesh.graded(20, 1.0, 1.5)
    s = 0.5 * (t[7] + t[8])
    w = integral_weights_at(t, 7, s, 0.6)
    vals = 2 * t[:9] + 1
    ref = 2 * s**1.6 / math.gamma(2.6) + s**0.6 / math.gamma(1.6)
    assert w @ vals == pytest.approx(ref, rel=1e-12)
    with pytest.raises(InputError):
        integral_weights_at(t, 7, t[9], 0.6)


def test_rl_square_converges_at_second_order():
    alpha = 0.3
    errs = []
    for n in (64, 128, 256):
        t = mesh.uniform(n, 1.0)
        out = rl_integral(SampledFunction(t, t**2), alpha).values
        errs.append(np.max(np.abs(out - [oracles.rl_power(2, alpha, x) for x in t])))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates >= 1.5)


def test_graded_mesh_power_function():
    # t^alpha is not piecewise linear, so the graded mesh improves but does not make the rule exact
    alpha = 0.5
    errs = []
    for n in (64, 256):
        t = mesh.graded(n, 1.0, 1 / alpha)
        out = rl_integral(SampledFunction(t, t**alpha), alpha).values[-1]
        errs.append(abs(out - oracles.rl_power(alpha, alpha, 1.0)))
    assert errs[0] <= 1e-4
    assert errs[1] < errs[0] / 8


def test_caputo_of_constant_is_zero():
    t = mesh.graded(30, 2.0, 2.0)
    d = caputo_derivative_all(SampledFunction(t, np.full_like(t, 3.0)), 0.4)
    assert np.allclose(d, 0.0, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_caputo_of_linear_is_exact(alpha):
    t = mesh.graded(40, 2.0, 1.7)
    d = caputo_derivative_all(SampledFunction(t, 5 * t), alpha)
    assert np.allclose(d[1:], [5 * oracles.caputo_power(1, alpha, x) for x in t[1:]], rtol=1e-10)


def test_caputo_of_power_alpha():
    alpha = 0.5
    t = mesh.graded(400, 1.0, 1 / alpha)
    d = caputo_derivative_all(SampledFunction(t, t**alpha), alpha)
    # node 0 through the gamma limit is exact here
    assert d[0] == pytest.approx(math.gamma(alpha + 1), rel=1e-14)
    # the interpolant is linear on the first intervals, so accuracy builds up away from the origin
    err = np.abs(d - math.gamma(alpha + 1))
    assert np.max(err[t >= 0.01]) <= 1e-3
    assert np.max(err[t >= 0.5]) <= 1e-4


def test_caputo_of_mittag_leffler():
    alpha = 0.6
    errs = []
    for n in (200, 400):
        t = mesh.graded(n, 2.0, 1 / alpha)
        v = np.asarray(mittag_leffler(-(t**alpha), alpha))
        d = caputo_derivative_all(SampledFunction(t, v), alpha)
        errs.append(np.max(np.abs(d[n // 10 :] + v[n // 10 :])))
    assert errs[1] <= 1e-2
    assert errs[1] < errs[0]


def test_derivative_inverts_integral():
    alpha = 0.4
    errs = []
    for n in (100, 200, 400):
        t = mesh.uniform(n, 1.0)
        psi = np.cos(3 * t)
        back = caputo_derivative_all(rl_integral(SampledFunction(t, psi), alpha), alpha)
        errs.append(np.max(np.abs(back - psi)[n // 4 :]))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] <= 1e-2


def test_derivative_kernel_table():
    t = mesh.uniform(10, 1.0)
    W = convolution_weights(t, 0.5, Kernel.DERIVATIVE)
    v = t**2
    assert W.row(4) @ v[:5] == pytest.approx(caputo_derivative(SampledFunction(t, v), 0.5, 4))
    assert np.allclose(W.row(0), 0)


def test_explicit_zero_solution_satisfies_equation():
    alpha, beta = 0.5, 0.5
    phi = explicit_zero_solution(alpha, beta)
    t = mesh.graded(200, 1.0, 2.0)
    x = phi(t)
    d = caputo_derivative_all(SampledFunction(t, x), alpha)
    # x = c t^(alpha/(1-beta)) = c t is linear here, so the derivative is exact
    assert np.allclose(d[1:], x[1:] ** beta, rtol=1e-9)


@pytest.mark.parametrize(
    "t", [np.array([]), np.array([0.1, 0.2]), np.array([0.0, 0.5, 0.5]), np.array([[0.0, 1.0]])]
)
def test_bad_meshes(t):
    with pytest.raises(InputError):
        SampledFunction(t, np.zeros(t.shape[-1] if t.size else 0))


def test_bad_order_and_nodes():
    f = SampledFunction(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    with pytest.raises(InputError):
        rl_integral(f, 1.0)
    with pytest.raises(InputError):
        caputo_derivative(f, 0.5, 5)
    with pytest.raises(InputError):
        caputo_derivative(SampledFunction(np.array([0.0]), np.array([1.0])), 0.5, 0)


def test_vector_valued_samples():
    t = mesh.uniform(20, 1.0)
    v = np.stack([t, 2 * t], axis=1)
    out = rl_integral(SampledFunction(t, v), 0.5).values
    assert out.shape == v.shape
    assert np.allclose(out[:, 1], 2 * out[:, 0])

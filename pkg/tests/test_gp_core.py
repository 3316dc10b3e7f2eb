import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpmisspec.designs import Design, gen_grid, gen_halton
from gpmisspec.errors import DomainError, NumericalError
from gpmisspec.gp_core import (
    ConditionedModel,
    _clamp,
    conditional_moments,
    conditional_variance,
    cross_wce_sq,
    interpolate,
    rkhs_norm_sq,
)
from gpmisspec.kernels import MaternKernel, MaternParams


def test_interpolates_data(grid64):
    k = MaternKernel(MaternParams(1.5))
    y = np.sin(5 * grid64.points[:, 0])
    m = ConditionedModel.condition(k, grid64, y)
    np.testing.assert_allclose(interpolate(m, grid64.points[:, 0]), y, atol=1e-9)
    np.testing.assert_allclose(conditional_variance(m, grid64.points[:, 0]), 0.0, atol=1e-10)


def test_scalar_queries(grid64):
    m = ConditionedModel.condition(MaternKernel(MaternParams(0.5)), grid64, np.ones(64))
    mean, var = conditional_moments(m, 0.3)
    assert isinstance(mean, float) and isinstance(var, float)
    k2 = MaternKernel(MaternParams(0.5), 2)
    m2 = ConditionedModel.condition(k2, gen_halton(2, 10))
    assert isinstance(conditional_variance(m2, [0.2, 0.4]), float)
    assert conditional_variance(m2, [[0.2, 0.4], [0.5, 0.5]]).shape == (2,)


def test_brownian_bridge_variance():
    # nu = 1/2 is Ornstein-Uhlenbeck; between two points the variance is closed form
    theta = 1.0
    p = MaternParams(0.5, theta)
    c = p.diagonal
    d = Design([[0.2], [0.6]])
    m = ConditionedModel.condition(MaternKernel(p), d)
    x = 0.35
    a, b = x - 0.2, 0.6 - x
    ea, eb, e = np.exp(-2 * a), np.exp(-2 * b), np.exp(-2 * 0.4)
    expected = c * (1 - ea) * (1 - eb) / (1 - e)
    assert conditional_variance(m, x) == pytest.approx(expected, rel=1e-12)


def test_empty_design_gives_prior():
    k = MaternKernel(MaternParams(1.5))
    m = ConditionedModel.condition(k, Design.empty(1), np.zeros(0))
    mean, var = conditional_moments(m, np.array([0.1, 0.9]))
    np.testing.assert_array_equal(mean, 0.0)
    np.testing.assert_allclose(var, k.params.diagonal)
    assert rkhs_norm_sq(m) == 0.0


def test_errors(grid64):
    k = MaternKernel(MaternParams(1.5))
    m = ConditionedModel.condition(k, grid64)
    with pytest.raises(DomainError):
        interpolate(m, 0.5)
    with pytest.raises(DomainError):
        conditional_variance(m, 1.5)
    with pytest.raises(DomainError):
        m.with_data(np.ones(3))
    with pytest.raises(DomainError):
        ConditionedModel.condition(MaternKernel(MaternParams(1.5), 2), grid64)


def test_data_is_frozen(grid64):
    y = np.ones(64)
    m = ConditionedModel.condition(MaternKernel(MaternParams(0.5)), grid64, y)
    y[0] = 5.0
    assert m.data[0] == 1.0
    with pytest.raises(ValueError):
        m.data[0] = 2.0


def test_clamp_policy():
    scale = np.ones(3)
    np.testing.assert_array_equal(_clamp(np.array([-1e-10, 0.0, 1.0]), scale, "v"), [0.0, 0.0, 1.0])
    with pytest.raises(NumericalError):
        _clamp(np.array([-1e-6]), np.ones(1), "v")


def test_rkhs_norm_of_kernel_section(grid64):
    k = MaternKernel(MaternParams(1.5))
    x0 = grid64.points[:, 0][5]
    y = k.cross(grid64.points, np.array([[x0]]))[:, 0]
    m = ConditionedModel.condition(k, grid64, y)
    assert rkhs_norm_sq(m) == pytest.approx(k.params.diagonal, rel=1e-8)


def test_cross_wce_same_kernel_is_variance(halton2d, rng):
    k = MaternKernel(MaternParams(1.5, 2.0), 2)
    q = rng.uniform(size=(50, 2))
    a = cross_wce_sq(k, k, halton2d, q)
    b = conditional_variance(ConditionedModel.condition(k, halton2d), q)
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_cross_wce_empty_design():
    k1 = MaternKernel(MaternParams(0.5, 1.0, 2.0))
    k2 = MaternKernel(MaternParams(1.5))
    assert cross_wce_sq(k1, k2, Design.empty(1), 0.4) == pytest.approx(k1.params.diagonal)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.0, 1.0))
def test_cross_wce_scales_with_data_kernel(s2, x):
    d = gen_grid(1, 16)
    k1 = MaternKernel(MaternParams(0.5))
    k1s = MaternKernel(MaternParams(0.5, 1.0, np.sqrt(s2)))
    k2 = MaternKernel(MaternParams(1.5))
    a = cross_wce_sq(k1, k2, d, x)
    b = cross_wce_sq(k1s, k2, d, x)
    assert b == pytest.approx(s2 * a, rel=1e-10, abs=1e-300)


def test_cross_wce_misspecified_exceeds_zero():
    d = gen_grid(1, 8)
    k1 = MaternKernel(MaternParams(0.5))
    k2 = MaternKernel(MaternParams(2.5))
    q = np.linspace(0, 1, 33)
    assert np.all(cross_wce_sq(k1, k2, d, q) >= 0)
    assert np.all(cross_wce_sq(k1, k2, d, d.points[:, 0]) <= 1e-8)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from gpmisspec.errors import DomainError
from gpmisspec.specfun import (
    SMALL_Z_THRESHOLD,
    BesselEvalMode,
    bessel_k,
    bessel_k_scaled,
    eval_mode,
    half_integer_index,
    log_gamma,
    scaled_matern_radial,
)

# K_nu(z) from int_0^inf exp(-z cosh t) cosh(nu t) dt by adaptive quadrature
# (relative tolerance 1e-13), cross-checked against mpmath.
QUADRATURE_ORACLE = [
    (0.3, 0.001, 14.406547529041024),
    (0.3, 0.05, 3.81196633676911),
    (0.3, 0.7, 0.6895624897569751),
    (0.3, 1.9, 0.13137942527906507),
    (0.3, 2.1, 0.10260207043456641),
    (0.3, 5.0, 0.0037216693288734267),
    (0.3, 17.0, 1.2526862795855595e-08),
    (0.3, 30.0, 2.135627028326096e-14),
    (1.0, 0.001, 999.9962381560854),
    (1.0, 0.05, 19.909674325882506),
    (1.0, 0.7, 1.050283535312918),
    (1.0, 1.9, 0.15966015303266762),
    (1.0, 2.1, 0.12274641153350789),
    (1.0, 5.0, 0.004044613445452164),
    (1.0, 17.0, 1.2857041671666648e-08),
    (1.0, 30.0, 2.1677320018915473e-14),
    (2.7, 0.001, 631816692.6720164),
    (2.7, 0.05, 16338.512785968016),
    (2.7, 0.7, 12.265815446665282),
    (2.7, 1.9, 0.5671072495435096),
    (2.7, 2.1, 0.39703441651852023),
    (2.7, 5.0, 0.00712624875563333),
    (2.7, 17.0, 1.5385028136937074e-08),
    (2.7, 30.0, 2.4030878842059358e-14),
]


@pytest.mark.parametrize("nu,z,expected", QUADRATURE_ORACLE)
def test_bessel_k_matches_quadrature(nu, z, expected):
    assert bessel_k(nu, z) == pytest.approx(expected, rel=1e-12)


def test_bessel_k_one_one():
    assert bessel_k(1.0, 1.0) == pytest.approx(0.6019072301972346, rel=1e-14)


def test_half_integer_closed_forms():
    z = np.linspace(1e-3, 30, 100)
    base = np.sqrt(np.pi / (2 * z)) * np.exp(-z)
    np.testing.assert_allclose(bessel_k(0.5, z), base, rtol=1e-14)
    np.testing.assert_allclose(bessel_k(1.5, z), base * (1 + 1 / z), rtol=1e-14)
    np.testing.assert_allclose(bessel_k(2.5, z), base * (1 + 3 / z + 3 / z**2), rtol=1e-14)


def test_numeric_path_agrees_with_closed_form():
    z = np.geomspace(1e-3, 40, 60)
    for nu in (0.5, 1.5, 2.5, 4.5):
        closed = bessel_k_scaled(nu, z)
        numeric = bessel_k_scaled(nu, z, mode=BesselEvalMode.NUMERIC)
        np.testing.assert_allclose(numeric, closed, rtol=1e-13)


def test_closed_form_refused_off_half_integer():
    with pytest.raises(DomainError):
        bessel_k(1.2, 1.0, mode=BesselEvalMode.HALF_INTEGER)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 10.0, allow_subnormal=False), st.floats(1e-4, 60.0))
def test_against_scipy(nu, z):
    ref = special.kve(nu, z)
    assert bessel_k_scaled(nu, z) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 6.0), st.floats(0.01, 40.0))
def test_recurrence(nu, z):
    lhs = bessel_k_scaled(nu + 1, z)
    rhs = 2 * nu / z * bessel_k_scaled(nu, z) + bessel_k_scaled(abs(nu - 1), z)
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_underflow_flag():
    v, flag = bessel_k(0.3, 800.0, full_output=True)
    assert v == 0.0 and flag
    v, flag = bessel_k(0.3, 1.0, full_output=True)
    assert v > 0 and not flag


@pytest.mark.parametrize("z", [0.0, -1.0, math.inf, math.nan])
def test_bad_arguments(z):
    with pytest.raises(DomainError):
        bessel_k(1.0, z)


def test_bad_order():
    with pytest.raises(DomainError):
        bessel_k(-0.5, 1.0)


def test_modes():
    assert half_integer_index(2.5) == 2
    assert half_integer_index(2.0) is None
    assert eval_mode(0.5) is BesselEvalMode.HALF_INTEGER
    assert eval_mode(0.7) is BesselEvalMode.NUMERIC


def test_log_gamma():
    assert log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-15)
    with pytest.raises(DomainError):
        log_gamma(0.0)


@pytest.mark.parametrize("nu", [0.2, 0.5, 0.9, 1.0, 1.5, 2.7, 6.0])
def test_radial_at_zero(nu):
    limit = 2 ** (nu - 1) * math.gamma(nu)
    assert scaled_matern_radial(nu, 0.0) == pytest.approx(limit, rel=1e-14)


@pytest.mark.parametrize("nu", [0.1, 0.3, 0.75, 1.0, 1.3, 2.7])
def test_radial_continuity_at_threshold(nu):
    lo = scaled_matern_radial(nu, SMALL_Z_THRESHOLD * (1 - 1e-9))
    hi = scaled_matern_radial(nu, SMALL_Z_THRESHOLD * (1 + 1e-9))
    assert abs(lo - hi) / abs(hi) <= 1e-9


def test_radial_matches_definition():
    z = np.geomspace(1e-6, 50, 80)
    for nu in (0.3, 1.0, 1.5, 3.2):
        np.testing.assert_allclose(scaled_matern_radial(nu, z), z**nu * special.kv(nu, z), rtol=1e-12)


def test_radial_monotone():
    z = np.linspace(0, 20, 500)
    for nu in (0.3, 1.5, 2.7):
        assert np.all(np.diff(scaled_matern_radial(nu, z)) <= 0)

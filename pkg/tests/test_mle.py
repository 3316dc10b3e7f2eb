import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpmisspec.designs import Design, gen_grid, gen_halton
from gpmisspec.errors import DesignError, DomainError
from gpmisspec.experiments import nested_designs
from gpmisspec.kernels import MaternKernel, MaternParams
from gpmisspec.mle import (
    MisspecScenario,
    classify_growth,
    driscoll_trace,
    expected_mle,
    expected_mle_details,
    matern_range_bounds,
    mle_decomposition,
    scale_mle,
)


def test_scenario_properties():
    s = MisspecScenario(MaternParams(0.5), MaternParams(2.5), 2)
    assert s.alpha0 == 1.5 and s.alpha == 3.5
    assert s.theoretical_slope == 2.0 and s.has_rate_theory
    assert not MisspecScenario(MaternParams(2.5), MaternParams(0.5)).has_rate_theory
    with pytest.raises(DomainError):
        MisspecScenario(MaternParams(0.5), MaternParams(0.5, 1.0, 2.0))


def test_scale_mle_matches_formula(grid64, rng):
    k = MaternKernel(MaternParams(1.5))
    y = rng.standard_normal(64)
    r = k.cross(grid64.points, grid64.points)
    assert scale_mle(k, grid64, y) == pytest.approx(y @ np.linalg.solve(r, y) / 64, rel=1e-8)
    with pytest.raises(DomainError):
        scale_mle(k, grid64, y[:10])


@pytest.mark.parametrize("s2", [0.25, 4.0])
def test_unbiased_when_correct(s2):
    s = MisspecScenario(MaternParams(1.5, 2.0, math.sqrt(s2)), MaternParams(1.5, 2.0), 2)
    assert expected_mle(s, gen_halton(2, 36)) == pytest.approx(s2, rel=1e-9)


def test_methods():
    s = MisspecScenario(MaternParams(0.5), MaternParams(1.5))
    g = gen_grid(1, 16)
    assert expected_mle_details(s, g, "auto").method == "markov"
    assert expected_mle_details(s, g).method == "dense"
    s2 = MisspecScenario(MaternParams(0.5), MaternParams(1.5), 2)
    assert expected_mle_details(s2, gen_halton(2, 9), "auto").method == "dense"
    with pytest.raises(DomainError):
        expected_mle(s2, gen_halton(2, 9), "markov")
    with pytest.raises(DomainError):
        expected_mle(s, g, "sparse")
    with pytest.raises(DomainError):
        expected_mle(s, gen_halton(2, 9))


@pytest.mark.parametrize("design", [gen_grid(1, 64), gen_halton(1, 64), gen_halton(2, 40)])
def test_decomposition_identity(design):
    s = MisspecScenario(MaternParams(0.5), MaternParams(1.5), design.d)
    rep = mle_decomposition(s, design)
    assert rep.identity_gap <= 1e-9
    assert rep.running_mean[-1] == pytest.approx(rep.mean)
    assert np.all(rep.numerators > 0) and np.all(rep.denominators > 0)


def test_decomposition_first_term():
    s = MisspecScenario(MaternParams(0.5, 1.0, 2.0), MaternParams(1.5))
    rep = mle_decomposition(s, gen_grid(1, 8))
    assert rep.ratios[0] == pytest.approx(s.k_params.diagonal / s.r_params.diagonal)


def test_decomposition_markov_route():
    s = MisspecScenario(MaternParams(0.5), MaternParams(2.5))
    rep = mle_decomposition(s, gen_grid(1, 32), method="markov")
    assert rep.method == "markov"
    assert rep.mean == pytest.approx(rep.trace_over_n)


def test_range_bounds_values():
    s = MisspecScenario(MaternParams(1.5, 2.0), MaternParams(1.5, 1.0))
    assert matern_range_bounds(s) == pytest.approx((0.5, 8.0))
    s = MisspecScenario(MaternParams(1.5, 1.0), MaternParams(1.5, 2.0))
    assert matern_range_bounds(s) == pytest.approx((0.125, 2.0))
    with pytest.raises(DomainError):
        matern_range_bounds(MisspecScenario(MaternParams(0.5), MaternParams(1.5)))


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from([0.5, 1.5, 2.5]),
    st.floats(0.3, 3.0),
    st.floats(0.3, 3.0),
    st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12, unique=True),
)
def test_range_bounds_hold_for_any_points(nu, th0, th, xs):
    xs = np.unique(np.round(xs, 6))
    s = MisspecScenario(MaternParams(nu, th0), MaternParams(nu, th))
    lo, hi = matern_range_bounds(s)
    v = expected_mle(s, Design(xs[:, None]), "markov")
    assert lo * (1 - 1e-9) <= v <= hi * (1 + 1e-9)


def test_driscoll_anchor():
    s = MisspecScenario(MaternParams(1.5), MaternParams(1.5))
    rep = driscoll_trace(s, nested_designs("halton", 1, [16, 32, 64]))
    np.testing.assert_allclose(rep.traces, rep.sizes, rtol=1e-9)
    assert rep.slope == pytest.approx(1.0, abs=1e-9)
    assert rep.verdict()["label"] == "finite-N heuristic"


def test_driscoll_needs_nesting():
    s = MisspecScenario(MaternParams(1.5), MaternParams(1.5))
    with pytest.raises(DesignError):
        driscoll_trace(s, [gen_grid(1, 8), gen_grid(1, 16)])
    with pytest.raises(DomainError):
        driscoll_trace(s, [gen_grid(1, 8)])


def test_driscoll_rougher_model_grows_slowly():
    s = MisspecScenario(MaternParams(2.5), MaternParams(0.5))
    rep = driscoll_trace(s, nested_designs("grid", 1, [16, 64, 256]), method="markov")
    assert rep.classification == "apparently-bounded"


def test_classify_growth():
    assert classify_growth(0.05) == "apparently-bounded"
    assert classify_growth(0.3) == "inconclusive"
    assert classify_growth(1.0) == "apparently-divergent"

"""Small embedded invariant suite, run by ``gpmisspec selftest``."""

from __future__ import annotations

import math

import numpy as np

from .designs import gen_grid, gen_halton
from .gp_core import ConditionedModel, conditional_variance, cross_wce_sq
from .kernels import MaternKernel, MaternParams
from .mle import MisspecScenario, expected_mle, matern_range_bounds, mle_decomposition
from .specfun import bessel_k, scaled_matern_radial, SMALL_Z_THRESHOLD


def _rel(a, b):
    return abs(a - b) / abs(b)


def _bessel_half_integer():
    z = np.linspace(1e-3, 30, 25)
    closed = np.sqrt(np.pi / (2 * z)) * np.exp(-z) * (1 + 1 / z)
    return max(_rel(bessel_k(1.5, float(t)), c) for t, c in zip(z, closed))


def _radial_continuity():
    t = SMALL_Z_THRESHOLD
    return _rel(scaled_matern_radial(0.3, t * (1 - 1e-12)), scaled_matern_radial(0.3, t * (1 + 1e-12)))


def _unbiased():
    s = MisspecScenario(MaternParams(1.5, 1.0, 2.0), MaternParams(1.5))
    return _rel(expected_mle(s, gen_halton(1, 64)), 4.0)


def _decomposition():
    s = MisspecScenario(MaternParams(0.5), MaternParams(1.5))
    return mle_decomposition(s, gen_grid(1, 64)).identity_gap


def _range_bounds():
    s = MisspecScenario(MaternParams(1.5, 2.0), MaternParams(1.5, 1.0))
    lo, hi = matern_range_bounds(s)
    v = expected_mle(s, gen_grid(1, 64))
    return 0.0 if lo <= v <= hi else 1.0


def _markov_vs_dense():
    s = MisspecScenario(MaternParams(0.5), MaternParams(2.5))
    g = gen_grid(1, 32)
    return _rel(expected_mle(s, g, "markov"), expected_mle(s, g, "dense"))


def _cross_wce():
    k = MaternKernel(MaternParams(1.5), 2)
    g = gen_halton(2, 40)
    q = gen_halton(2, 60).points[40:]
    a = cross_wce_sq(k, k, g, q)
    b = conditional_variance(ConditionedModel.condition(k, g), q)
    return float(np.max(np.abs(a - b) / b))


CHECKS = (
    ("bessel_k half-integer closed form", _bessel_half_integer, 1e-10),
    ("radial continuity at small-z threshold", _radial_continuity, 1e-9),
    ("unbiased scale estimate", _unbiased, 1e-8),
    ("decomposition identity", _decomposition, 1e-8),
    ("range bounds", _range_bounds, 0.5),
    ("markov route agrees with dense", _markov_vs_dense, 1e-6),
    ("cross worst-case error equals variance", _cross_wce, 1e-10),
)


def run_selftest():
    """Return a list of (name, error, tolerance, passed)."""
    out = []
    for name, fn, tol in CHECKS:
        try:
            err = float(fn())
        except Exception:  # a crash is a failure, not an abort
            err = math.inf
        out.append((name, err, tol, bool(err <= tol)))
    return out

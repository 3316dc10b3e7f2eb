"""The scale maximum-likelihood estimate and its expectation under misspecification.

Data X_N ~ N(0, K_N) are modelled as N(0, sigma^2 R_N). The estimate is
sigma_hat^2 = X_N^T R_N^{-1} X_N / N and its expectation is tr(K_N R_N^{-1}) / N.
Visiting the design points one at a time, the expectation splits into the mean
of ratios (expected squared one-step residual under K) / (one-step variance
under R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DesignError, DomainError, NotPositiveDefiniteError
from .gram import CholeskyFactor, assemble_gram, cholesky, extend_factor, quadratic_form, trace_product
from .kernels import MaternKernel, MaternParams, rate_exponent, sobolev_order
from . import statespace

__all__ = [
    "DecompositionReport",
    "DriscollReport",
    "ExpectedMLE",
    "MisspecScenario",
    "driscoll_trace",
    "expected_mle",
    "expected_mle_details",
    "matern_range_bounds",
    "mle_decomposition",
    "scale_mle",
]

METHODS = ("dense", "markov", "auto")
DRISCOLL_BOUNDED = 0.1
DRISCOLL_DIVERGENT = 0.5


@dataclass(frozen=True)
class MisspecScenario:
    """Data-generating Matérn ``k_params`` and model Matérn ``r_params`` (sigma = 1) in dimension ``d``."""

    k_params: MaternParams
    r_params: MaternParams
    d: int = 1

    def __post_init__(self):
        if self.r_params.sigma != 1.0:
            raise DomainError("the model kernel carries no scale: r_params.sigma must be 1")
        if int(self.d) < 1:
            raise DomainError(f"dimension must be >= 1, got {self.d}")
        object.__setattr__(self, "d", int(self.d))

    @property
    def alpha0(self):
        return sobolev_order(self.k_params, self.d)

    @property
    def alpha(self):
        return sobolev_order(self.r_params, self.d)

    @property
    def theoretical_slope(self):
        return rate_exponent(self.k_params, self.r_params, self.d)

    @property
    def has_rate_theory(self):
        """True when the model is at least as smooth as the data (alpha >= alpha_0)."""
        return self.alpha >= self.alpha0

    def true_kernel(self):
        return MaternKernel(self.k_params, self.d)

    def model_kernel(self):
        return MaternKernel(self.r_params, self.d)

    def describe(self):
        return {"true": self.k_params.spec(), "model": self.r_params.spec(), "d": self.d}


def scale_mle(r_kernel, design, data, factor=None, policy=None):
    """sigma_hat^2 = X^T R_N^{-1} X / N."""
    data = np.asarray(data, dtype=float)
    if design.n < 1 or data.shape != (design.n,):
        raise DomainError(f"need a data vector of length N = {design.n} >= 1, got shape {data.shape}")
    if factor is None:
        factor = cholesky(assemble_gram(r_kernel, design), policy)
    return quadratic_form(data, factor) / design.n


@dataclass(frozen=True)
class ExpectedMLE:
    value: float
    method: str
    jitter_true: float = 0.0
    jitter_model: float = 0.0


def _resolve_method(method, scenario):
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; choose from {METHODS}")
    eligible = statespace.is_eligible(scenario.k_params, scenario.r_params, scenario.d)
    if method == "auto":
        return "markov" if eligible else "dense"
    if method == "markov" and not eligible:
        raise DomainError("the markov method needs d = 1 and half-integer smoothness for both kernels")
    return method


def expected_mle_details(s, design, method="dense", policy=None, r_factor=None):
    """Expected scale estimate with the route taken and the model jitter used.

    ``dense`` computes tr(K_N R_N^{-1}) / N by triangular solves against the
    Cholesky factor of R_N. ``markov`` runs the sequential state-space
    recursion (one dimension, half-integer smoothness) and never forms R_N.
    ``auto`` picks ``markov`` whenever it applies.
    """
    if design.n < 1:
        raise DomainError("expected MLE needs a nonempty design")
    if design.d != s.d:
        raise DomainError(f"design dimension {design.d} != scenario dimension {s.d}")
    route = _resolve_method(method, s)
    if route == "markov":
        terms = statespace.sequential_terms(s.k_params, s.r_params, design.points[:, 0])
        return ExpectedMLE(terms.mean(), "markov")
    if r_factor is None:
        r_factor = cholesky(assemble_gram(s.model_kernel(), design), policy)
    k_gram = assemble_gram(s.true_kernel(), design)
    return ExpectedMLE(trace_product(k_gram, r_factor) / design.n, "dense", 0.0, r_factor.jitter_applied)


def expected_mle(s, design, method="dense", policy=None):
    """E[sigma_hat^2] = tr(K_N R_N^{-1}) / N."""
    return expected_mle_details(s, design, method, policy).value


@dataclass(frozen=True)
class DecompositionReport:
    numerators: np.ndarray
    denominators: np.ndarray
    order: np.ndarray
    trace_over_n: float
    method: str = "dense"
    jitter_model: float = 0.0

    @property
    def ratios(self):
        return self.numerators / self.denominators

    @property
    def running_mean(self):
        return np.cumsum(self.ratios) / np.arange(1, len(self.ratios) + 1)

    @property
    def mean(self):
        return float(np.mean(self.ratios))

    @property
    def identity_gap(self):
        """Relative difference between the mean of terms and tr(K R^{-1}) / N."""
        return abs(self.mean - self.trace_over_n) / abs(self.trace_over_n)


def mle_decomposition(s, design, method="dense", policy=None):
    """Sequential decomposition of the expected scale estimate.

    The dense route follows the design order, growing the Cholesky factor of
    R one point at a time. Term n is the squared worst-case error over the
    unit ball of K of interpolating with R on the first n-1 points, divided by
    the same quantity for the unit ball of R (the model variance). The markov
    route visits points in increasing order instead.
    """
    if design.n < 1:
        raise DomainError("decomposition needs a nonempty design")
    route = _resolve_method(method, s)
    if route == "markov":
        terms = statespace.sequential_terms(s.k_params, s.r_params, design.points[:, 0])
        return DecompositionReport(terms.numerators, terms.denominators, terms.order, terms.mean(), "markov")

    K = assemble_gram(s.true_kernel(), design).entries
    R_gram = assemble_gram(s.model_kernel(), design)
    full = cholesky(R_gram, policy)
    R = R_gram.entries
    N = design.n
    num = np.empty(N)
    den = np.empty(N)
    factor = None
    for n in range(N):
        if factor is None:
            # same jitter as the full factor, so the terms sum to the jittered trace
            factor = CholeskyFactor(np.array([[math.sqrt(R[0, 0] + full.jitter_applied)]]), full.jitter_applied)
            weights = np.zeros(0)
        else:
            cross = R[:n, n]
            weights = factor.solve(cross)
            try:
                factor = extend_factor(factor, cross, R[n, n])
            except NotPositiveDefiniteError as exc:
                raise NotPositiveDefiniteError(f"degenerate extension at n = {n + 1}: {exc}", pivot=n + 1) from exc
        den[n] = factor.L[n, n] ** 2
        # residual weights (-a, 1) applied to K on the first n+1 points
        w = np.append(-weights, 1.0)
        num[n] = float(w @ K[: n + 1, : n + 1] @ w)
        if not den[n] > 0.0:
            raise NotPositiveDefiniteError(f"non-positive model variance at n = {n + 1}", pivot=n + 1)
    trace = trace_product(K, full) / N
    return DecompositionReport(num, den, np.arange(N), trace, "dense", full.jitter_applied)


def matern_range_bounds(s):
    """Lower and upper bounds on E[sigma_hat^2] when only the range is misspecified.

    Valid for any distinct observation points and every N. Requires equal
    smoothness for the data and model kernels.
    """
    if s.k_params.nu != s.r_params.nu:
        raise DomainError("range bounds need equal smoothness for the data and model kernels")
    sigma0_sq = s.k_params.sigma**2
    nu0 = s.k_params.nu
    theta0, theta = s.k_params.theta, s.r_params.theta
    if theta0 >= theta:
        return sigma0_sq * (theta / theta0) ** s.d, sigma0_sq * (theta0 / theta) ** (2 * nu0)
    return sigma0_sq * (theta0 / theta) ** (2 * nu0), sigma0_sq * (theta / theta0) ** s.d


@dataclass(frozen=True)
class DriscollReport:
    sizes: tuple
    traces: tuple
    slope: float
    classification: str
    label: str = "finite-N heuristic"
    methods: tuple = field(default=())

    def verdict(self):
        return {"slope": self.slope, "classification": self.classification, "label": self.label}


def classify_growth(slope):
    if slope <= DRISCOLL_BOUNDED:
        return "apparently-bounded"
    if slope >= DRISCOLL_DIVERGENT:
        return "apparently-divergent"
    return "inconclusive"


def driscoll_trace(s, designs, method="dense", policy=None):
    """Trace sequence tr(K_N R_N^{-1}) over nested designs and a growth-slope label.

    The label is a finite-N heuristic; no finite computation decides whether
    the trace stays bounded as N grows.
    """
    from .experiments import fit_loglog

    designs = list(designs)
    if len(designs) < 2:
        raise DomainError("Driscoll diagnostic needs at least two designs")
    for a, b in zip(designs, designs[1:]):
        if not (a.n < b.n and a.is_prefix_of(b)):
            raise DesignError("designs must be nested, each a strict prefix of the next")
    traces = []
    methods = []
    for des in designs:
        res = expected_mle_details(s, des, method, policy)
        traces.append(res.value * des.n)
        methods.append(res.method)
    sizes = tuple(des.n for des in designs)
    fit = fit_loglog(sizes, traces, min_points=2)
    return DriscollReport(sizes, tuple(traces), fit.slope, classify_growth(fit.slope), methods=tuple(methods))

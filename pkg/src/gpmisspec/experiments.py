"""Empirical checks: Monte-Carlo oracle, rate sweeps and variance-decay sweeps.

Random normals come from NumPy's Philox counter-based generator keyed by
(seed, replicate), so each replicate's draws are fixed regardless of how the
work is scheduled.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .designs import gen_grid, gen_halton, geometry, grid_side
from .errors import DomainError, NotPositiveDefiniteError, NumericalError
from .gp_core import ConditionedModel, conditional_variance
from .gram import assemble_gram, cholesky
from .mle import MisspecScenario, expected_mle_details

log = logging.getLogger(__name__)

__all__ = [
    "LogLogFit",
    "MonteCarloEstimate",
    "RateFitReport",
    "SweepConfig",
    "SweepRow",
    "VarianceDecayReport",
    "build_designs",
    "fit_loglog",
    "mc_expected_mle",
    "rate_sweep",
    "resolve_threads",
    "sample_paths",
    "query_grid",
    "variance_decay_sweep",
]

NO_THEORY_BANNER = "no theoretical rate available: the model is rougher than the data (alpha < alpha_0)"
MIN_R2 = 0.98


def resolve_threads(threads=None):
    """Worker count from the argument, then GPMISSPEC_THREADS, then the CPU count."""
    if threads is None:
        env = os.environ.get("GPMISSPEC_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    threads = int(threads)
    if threads < 1:
        raise DomainError(f"thread count must be >= 1, got {threads}")
    return threads


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r_squared: float


def fit_loglog(sizes, values, min_points=3):
    """Ordinary least squares of log(value) on log(size)."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("sizes and values must be equal-length sequences")
    if len(x) < min_points:
        raise DomainError(f"log-log fit needs at least {min_points} points, got {len(x)}")
    if np.any(~np.isfinite(y)) or np.any(y <= 0.0):
        raise DomainError("log-log fit needs finite positive values")
    y = np.log(y)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise DomainError("log-log fit needs at least two distinct sizes")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    sst = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / sst if sst > 0 else 1.0
    return LogLogFit(slope, intercept, r2)


def sample_paths(kernel, design, replicates, seed, factor=None, policy=None):
    """Draw ``replicates`` Gaussian vectors N(0, K_N), one per row."""
    replicates = int(replicates)
    if replicates < 1:
        raise DomainError(f"need at least one replicate, got {replicates}")
    if factor is None:
        factor = cholesky(assemble_gram(kernel, design), policy)
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError("seed must be a non-negative 64-bit integer")
    z = np.empty((replicates, design.n))
    for r in range(replicates):
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, r], dtype=np.uint64)))
        z[r] = gen.standard_normal(design.n)
    return z @ factor.L.T


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    replicates: int
    jitter_true: float = 0.0
    jitter_model: float = 0.0


def mc_expected_mle(s, design, replicates, seed, policy=None):
    """Sample mean and standard error of the scale estimate over simulated data."""
    if int(replicates) < 2:
        raise DomainError("Monte-Carlo estimate needs at least two replicates")
    k_factor = cholesky(assemble_gram(s.true_kernel(), design), policy)
    r_factor = cholesky(assemble_gram(s.model_kernel(), design), policy)
    paths = sample_paths(s.true_kernel(), design, replicates, seed, factor=k_factor)
    w = r_factor.half_solve(paths.T)
    est = np.sum(w * w, axis=0) / design.n
    return MonteCarloEstimate(
        float(np.mean(est)),
        float(np.std(est, ddof=1) / math.sqrt(len(est))),
        int(replicates),
        k_factor.jitter_applied,
        r_factor.jitter_applied,
    )


def build_designs(kind, d, sizes):
    """One design per size: separate midpoint grids, or prefixes of one Halton sequence."""
    sizes = [int(n) for n in sizes]
    if kind == "grid":
        out = []
        for n in sizes:
            m = grid_side(n, d)
            if m is None:
                raise DomainError(f"grid designs need sizes that are perfect {d}-th powers, got {n}")
            out.append(gen_grid(d, m))
        return out
    if kind == "halton":
        full = gen_halton(d, max(sizes))
        return [full.prefix(n) for n in sizes]
    raise DomainError(f"unknown design kind {kind!r}; choose grid or halton")


def nested_designs(kind, d, sizes):
    """Nested family: prefixes of the largest grid (bit-reversed order) or of a Halton sequence."""
    if kind == "grid":
        m = grid_side(max(sizes), d)
        if m is None:
            raise DomainError(f"the largest size must be a perfect {d}-th power for a grid family")
        full = gen_grid(d, m)
        return [full.prefix(int(n)) for n in sizes]
    return build_designs(kind, d, sizes)


def _check_sizes(sizes):
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) < 3:
        raise DomainError("a sweep needs at least three sizes")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DomainError("sweep sizes must be strictly increasing")
    if sizes[0] < 1:
        raise DomainError("sweep sizes must be positive")
    return sizes


@dataclass(frozen=True)
class SweepConfig:
    scenario: MisspecScenario
    sizes: tuple
    design: str = "grid"
    seed: int = 0
    replicates: int = 0
    tolerance: float = 0.3
    method: str = "auto"
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "sizes", _check_sizes(self.sizes))
        if self.design not in ("grid", "halton"):
            raise DomainError(f"unknown design kind {self.design!r}")
        if self.replicates == 1 or self.replicates < 0:
            raise DomainError("Monte-Carlo runs need at least two replicates (or zero to skip)")
        if not self.tolerance > 0:
            raise DomainError("slope tolerance must be positive")


@dataclass(frozen=True)
class SweepRow:
    n: int
    expected_mle: float
    mc_mean: float
    mc_stderr: float
    jitter_true: float
    jitter_model: float
    fill: float
    separation: float
    method: str = ""
    error: str = ""


@dataclass(frozen=True)
class RateFitReport:
    scenario: dict
    sizes: tuple
    values: tuple
    slope: float
    intercept: float
    r_squared: float
    theoretical_slope: float | None
    tolerance: float
    passed: bool | None
    complete: bool
    curvature_slope: float
    rows: tuple = field(default=())
    banner: str = ""
    design: str = "grid"

    def to_json(self):
        return {
            "scenario": self.scenario,
            "sizes": list(self.sizes),
            "values": list(self.values),
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r_squared,
            "theoretical_slope": self.theoretical_slope,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "complete": self.complete,
            "curvature_slope": self.curvature_slope,
            "design": self.design,
            "banner": self.banner,
        }


def _sweep_one(cfg, design):
    s = cfg.scenario
    geo = geometry(design)
    try:
        res = expected_mle_details(s, design, cfg.method)
        mc_mean = mc_err = math.nan
        jitter_true = res.jitter_true
        if cfg.replicates:
            mc = mc_expected_mle(s, design, cfg.replicates, cfg.seed)
            mc_mean, mc_err, jitter_true = mc.mean, mc.stderr, mc.jitter_true
        return SweepRow(design.n, res.value, mc_mean, mc_err, jitter_true, res.jitter_model,
                        geo.fill_distance, geo.separation_radius, res.method)
    except (NotPositiveDefiniteError, NumericalError) as exc:
        log.warning("size %d failed: %s", design.n, exc)
        return SweepRow(design.n, math.nan, math.nan, math.nan, math.nan, math.nan,
                        geo.fill_distance, geo.separation_radius, cfg.method, f"{exc.code}: {exc}")


def _fit_summary(sizes, values, theory, tolerance):
    ok = [(n, v) for n, v in zip(sizes, values) if math.isfinite(v) and v > 0]
    if len(ok) < 3:
        return LogLogFit(math.nan, math.nan, math.nan), math.nan, False if theory is not None else None
    ns, vs = zip(*ok)
    fit = fit_loglog(ns, vs)
    curv = fit_loglog(ns[-3:], vs[-3:]).slope
    passed = None
    if theory is not None:
        passed = bool(abs(fit.slope - theory) <= tolerance and fit.r_squared >= MIN_R2)
    return fit, curv, passed


def rate_sweep(cfg):
    """Expected scale estimate over the size list, with a log-log slope fit.

    The fitted slope is compared to 2 (nu - nu_0) / d when the model is at
    least as smooth as the data; otherwise the report carries a banner and
    no pass/fail verdict. Sizes whose factorization fails are kept as rows
    with NaN values and the report is marked incomplete.
    """
    s = cfg.scenario
    designs = build_designs(cfg.design, s.d, cfg.sizes)
    with ThreadPoolExecutor(max_workers=resolve_threads(cfg.threads)) as pool:
        rows = tuple(pool.map(lambda des: _sweep_one(cfg, des), designs))
    values = tuple(r.expected_mle for r in rows)
    theory = s.theoretical_slope if s.has_rate_theory else None
    fit, curv, passed = _fit_summary(cfg.sizes, values, theory, cfg.tolerance)
    return RateFitReport(
        scenario=s.describe(),
        sizes=cfg.sizes,
        values=values,
        slope=fit.slope,
        intercept=fit.intercept,
        r_squared=fit.r_squared,
        theoretical_slope=theory,
        tolerance=cfg.tolerance,
        passed=passed,
        complete=all(not r.error for r in rows),
        curvature_slope=curv,
        rows=rows,
        banner="" if theory is not None else NO_THEORY_BANNER,
        design=cfg.design,
    )


def query_grid(d, resolution=4096):
    """Query grid for sup-over-x checks: ``resolution`` points in 1-d, a tensor grid of similar size otherwise."""
    per_axis = resolution if d == 1 else max(2, int(round(resolution ** (1.0 / d))))
    axis = np.linspace(0.0, 1.0, per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


@dataclass(frozen=True)
class VarianceDecayReport:
    kernel: str
    sizes: tuple
    values: tuple
    slope: float
    intercept: float
    r_squared: float
    theoretical_slope: float | None
    tolerance: float
    passed: bool | None
    test_grid_points: int
    design: str = "grid"

    def to_json(self):
        return {
            "kernel": self.kernel,
            "sizes": list(self.sizes),
            "values": list(self.values),
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r_squared,
            "theoretical_slope": self.theoretical_slope,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "test_grid_points": self.test_grid_points,
            "design": self.design,
        }


def variance_decay_sweep(kernel, sizes, design="grid", resolution=4096, tolerance=0.2, threads=None):
    """Maximum conditional variance over a test grid, per design size, with a slope fit.

    For a Matérn model the fitted slope is compared to -2 nu / d.
    """
    sizes = _check_sizes(sizes)
    d = kernel.dim
    designs = build_designs(design, d, sizes)
    grid = query_grid(d, resolution)

    def sup_var(des):
        model = ConditionedModel.condition(kernel, des)
        return float(np.max(conditional_variance(model, grid)))

    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as pool:
        values = tuple(pool.map(sup_var, designs))
    params = getattr(kernel, "params", None)
    theory = -2.0 * params.nu / d if params is not None else None
    fit, _, passed = _fit_summary(sizes, values, theory, tolerance)
    return VarianceDecayReport(getattr(kernel, "tag", "kernel"), sizes, values, fit.slope, fit.intercept,
                               fit.r_squared, theory, tolerance, passed, len(grid), design)

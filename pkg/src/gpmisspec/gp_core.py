"""Conditional moments, kernel interpolation and cross-kernel worst-case errors.

For a model kernel R and design points x_1..x_N,

    mean(x)     = r_N(x)^T R_N^{-1} f_N
    variance(x) = R(x, x) - r_N(x)^T R_N^{-1} r_N(x),

and for a pair of kernels the squared worst-case error of interpolating with
K2 over the unit ball of K1 is

    K1(x, x) - 2 k1(x)^T K2^{-1} k2(x) + k2(x)^T K2^{-1} K1_N K2^{-1} k2(x),

evaluated in a rearranged form that avoids cancellation (see cross_wce_sq).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .gram import assemble_cross, assemble_gram, cholesky

__all__ = [
    "ConditionedModel",
    "NEGATIVE_TOLERANCE",
    "conditional_moments",
    "conditional_variance",
    "cross_wce_sq",
    "interpolate",
    "rkhs_norm_sq",
]

# Relative size below which a negative variance is treated as roundoff.
NEGATIVE_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class ConditionedModel:
    kernel: object
    design: object
    factor: object = None
    data: np.ndarray | None = None

    @classmethod
    def condition(cls, kernel, design, data=None, policy=None):
        if design.d != kernel.dim:
            raise DomainError(f"design dimension {design.d} != kernel dimension {kernel.dim}")
        factor = cholesky(assemble_gram(kernel, design), policy) if design.n else None
        if data is not None:
            data = _frozen(data, design.n)
        return cls(kernel, design, factor, data)

    @property
    def n(self):
        return self.design.n

    def with_data(self, data):
        return ConditionedModel(self.kernel, self.design, self.factor, _frozen(data, self.n))


def _frozen(data, n):
    data = np.asarray(data, dtype=float).copy()
    if data.shape != (n,):
        raise DomainError(f"data vector has length {data.size}, design has {n} points")
    data.setflags(write=False)
    return data


def _queries(kernel, xs):
    xs = np.asarray(xs, dtype=float)
    # a scalar in 1-d, or a length-d vector in d > 1, is a single query
    single = xs.ndim == 0 if kernel.dim == 1 else xs.ndim == 1
    pts = kernel._points(np.atleast_1d(xs))
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise DomainError("query points must lie in the unit hypercube")
    return pts, single


def _clamp(raw, scale, what):
    bad = raw < -NEGATIVE_TOLERANCE * scale
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NumericalError(
            f"{what} {raw[i]:.3e} is negative beyond roundoff (reference scale {scale[i]:.3e})"
        )
    return np.maximum(raw, 0.0)


def _variance(model, pts):
    prior = np.asarray(model.kernel.diag(pts), dtype=float)
    if model.n == 0:
        return prior
    r = assemble_cross(model.kernel, model.design.points, pts)  # N x M
    w = model.factor.half_solve(r)
    return _clamp(prior - np.einsum("ij,ij->j", w, w), prior, "conditional variance")


def conditional_variance(model, xs):
    pts, single = _queries(model.kernel, xs)
    out = _variance(model, pts)
    return float(out[0]) if single else out


def _mean(model, pts):
    if model.data is None:
        raise DomainError("conditional mean requires a data vector")
    if model.n == 0:
        return np.zeros(len(pts))
    r = assemble_cross(model.kernel, model.design.points, pts)
    coef = model.factor.solve(model.data)
    return r.T @ coef


def conditional_moments(model, xs):
    """Conditional mean and variance at one query point or an array of them."""
    pts, single = _queries(model.kernel, xs)
    mean = _mean(model, pts)
    var = _variance(model, pts)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def interpolate(model, xs):
    """Kernel interpolant of the attached data, evaluated at ``xs``."""
    pts, single = _queries(model.kernel, xs)
    out = _mean(model, pts)
    return float(out[0]) if single else out


def rkhs_norm_sq(model):
    """Squared RKHS norm f_N^T R_N^{-1} f_N of the interpolant of the data."""
    if model.data is None:
        raise DomainError("RKHS norm of the interpolant requires a data vector")
    if model.n == 0:
        return 0.0
    w = model.factor.half_solve(model.data)
    return float(w @ w)


def cross_wce_sq(k1, k2, design, xs, factor2=None, policy=None, factor1=None):
    """Squared worst-case error over the unit ball of ``k1`` when interpolating with ``k2``.

    ``factor1`` and ``factor2`` may carry precomputed Cholesky factors of the
    Gram matrices of k1 and k2 on ``design``.

    With K1_N = L1 L1^T and l = L1^{-1} k1(x), the quantity equals

        P1(x) + ||l - L1^T a||^2,   a = K2_N^{-1} k2(x),

    where P1 is the conditional variance under k1. Both terms are
    non-negative, so nothing cancels; when k1 == k2 the second term is zero
    up to roundoff and the result is exactly the conditional variance.
    """
    pts, single = _queries(k1, xs)
    prior = np.asarray(k1.diag(pts), dtype=float)
    if design.n == 0:
        out = prior
    else:
        f1 = factor1 if factor1 is not None else cholesky(assemble_gram(k1, design), policy)
        if factor2 is not None:
            f2 = factor2
        elif k2 is k1:
            f2 = f1
        else:
            f2 = cholesky(assemble_gram(k2, design), policy)
        ell = f1.half_solve(assemble_cross(k1, design.points, pts))  # N x M
        p1 = _clamp(prior - np.einsum("ij,ij->j", ell, ell), prior, "conditional variance")
        a = f2.solve(assemble_cross(k2, design.points, pts))  # interpolation weights
        gap = ell - f1.L.T @ a
        out = p1 + np.einsum("ij,ij->j", gap, gap)
    return float(out[0]) if single else out

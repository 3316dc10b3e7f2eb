"""Isotropic Matérn kernels and a small kernel interface.

The Matérn kernel is used in the unnormalised form

    R(x, y) = sigma^2 (theta ||x - y||)^nu K_nu(theta ||x - y||),

so its diagonal is sigma^2 2^{nu-1} Gamma(nu) rather than sigma^2. Nothing in
the package renormalises it.

Kernel specifications on the command line and in files use the grammar
``matern:nu=<f>,theta=<f>,sigma=<f>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .specfun import half_integer_index, scaled_matern_radial

__all__ = [
    "FunctionKernel",
    "Kernel",
    "MaternKernel",
    "MaternParams",
    "format_kernel_spec",
    "matern_eval",
    "matern_radial",
    "matern_spectral_density",
    "parse_kernel_spec",
    "rate_exponent",
    "sobolev_order",
]


@dataclass(frozen=True)
class MaternParams:
    """Matérn smoothness ``nu``, range ``theta`` (inverse length) and scale ``sigma``."""

    nu: float
    theta: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        for name in ("nu", "theta", "sigma"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise DomainError(f"Matérn {name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def diagonal(self):
        """Kernel value at zero distance, sigma^2 2^{nu-1} Gamma(nu)."""
        return self.sigma**2 * math.exp((self.nu - 1.0) * math.log(2.0) + math.lgamma(self.nu))

    @property
    def half_integer(self):
        return half_integer_index(self.nu) is not None

    def with_sigma(self, sigma):
        return MaternParams(self.nu, self.theta, sigma)

    def spec(self):
        return format_kernel_spec(self)


def format_kernel_spec(params):
    return f"matern:nu={params.nu!r},theta={params.theta!r},sigma={params.sigma!r}"


def parse_kernel_spec(text):
    """Parse ``matern:nu=<f>,theta=<f>,sigma=<f>`` into :class:`MaternParams`.

    ``theta`` and ``sigma`` default to 1 when omitted; ``nu`` is required.
    """
    family, sep, body = text.strip().partition(":")
    if family.strip().lower() != "matern" or not sep:
        raise DomainError(f"unsupported kernel specification {text!r}; expected 'matern:nu=...'")
    fields = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, eq, value = item.partition("=")
        key = key.strip().lower()
        if not eq or key not in ("nu", "theta", "sigma"):
            raise DomainError(f"bad field {item!r} in kernel specification {text!r}")
        if key in fields:
            raise DomainError(f"duplicate field {key!r} in kernel specification {text!r}")
        try:
            fields[key] = float(value)
        except ValueError:
            raise DomainError(f"non-numeric value for {key!r} in {text!r}") from None
    if "nu" not in fields:
        raise DomainError(f"kernel specification {text!r} lacks nu")
    return MaternParams(**fields)


def matern_radial(params, r):
    """Matérn kernel as a function of distance; vectorised over ``r``."""
    r = np.asarray(r, dtype=float)
    return params.sigma**2 * np.asarray(scaled_matern_radial(params.nu, params.theta * r))


def _as_point(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def matern_eval(params, x, y):
    """Matérn kernel value for a single pair of points of equal dimension."""
    x = _as_point(x)
    y = _as_point(y)
    if x.shape != y.shape:
        raise DomainError(f"dimension mismatch: {x.shape} vs {y.shape}")
    r = float(np.linalg.norm(x - y))
    return float(matern_radial(params, r))


def matern_spectral_density(params, d, xi):
    """Spectral density 2^{nu-1} Gamma(nu+d/2) pi^{-d/2} theta^{2nu} (theta^2 + |xi|^2)^{-(nu+d/2)}.

    The constant carries no sigma^2 factor. With sigma = 1 it inverts as
    R(r) = int S(xi) e^{i xi.r} dxi, i.e. (2 pi)^{-d} times the plain transform
    int R(x) e^{-i xi.x} dx. Rate statements do not depend on the constant.
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    xi = np.asarray(xi, dtype=float)
    if d == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
        sq = xi * xi
    elif xi.ndim >= 1 and xi.shape[-1] == d:
        sq = np.sum(xi * xi, axis=-1)
    else:
        raise DomainError(f"frequency vectors must have trailing dimension {d}")
    nu, theta = params.nu, params.theta
    expo = nu + d / 2.0
    log_c = (nu - 1.0) * math.log(2.0) + math.lgamma(expo) - (d / 2.0) * math.log(math.pi)
    out = np.exp(log_c + 2.0 * nu * math.log(theta) - expo * np.log(theta * theta + sq))
    return float(out) if np.ndim(out) == 0 else out


def sobolev_order(params, d):
    """Order alpha = nu + d/2 of the Sobolev space the kernel's RKHS is equivalent to."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return params.nu + d / 2.0


def rate_exponent(k_params, r_params, d):
    """Growth exponent 2 (alpha - alpha_0) / d of the expected scale estimate."""
    return 2.0 * (sobolev_order(r_params, d) - sobolev_order(k_params, d)) / d


class Kernel:
    """Positive-definite kernel on [0, 1]^dim.

    Subclasses implement :meth:`cross`, which returns the matrix of kernel
    values between two point arrays of shape (n, dim) and (m, dim).
    """

    dim: int
    params: MaternParams | None = None
    tag: str = "kernel"

    def cross(self, xs, ys):
        raise NotImplementedError

    def diag(self, xs):
        xs = self._points(xs)
        return np.array([self.cross(p[None, :], p[None, :])[0, 0] for p in xs])

    def __call__(self, x, y):
        x = _as_point(x)
        y = _as_point(y)
        if x.shape != (self.dim,) or y.shape != (self.dim,):
            raise DomainError(f"points must have dimension {self.dim}")
        return float(self.cross(x[None, :], y[None, :])[0, 0])

    def _points(self, xs):
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, self.dim) if self.dim > 1 else xs[:, None]
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise DomainError(f"expected points of dimension {self.dim}, got shape {xs.shape}")
        return xs


class MaternKernel(Kernel):
    def __init__(self, params, dim=1):
        if int(dim) < 1:
            raise DomainError(f"dimension must be >= 1, got {dim}")
        self.params = params
        self.dim = int(dim)
        self.tag = params.spec()

    def cross(self, xs, ys):
        xs = self._points(xs)
        ys = self._points(ys)
        diff = xs[:, None, :] - ys[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        return matern_radial(self.params, r)

    def diag(self, xs):
        xs = self._points(xs)
        return np.full(xs.shape[0], self.params.diagonal)

    def __repr__(self):
        return f"MaternKernel({self.params!r}, dim={self.dim})"


class FunctionKernel(Kernel):
    """Wrap a user callable ``fn(x, y) -> float`` as a kernel.

    The callable is evaluated pairwise, so this is meant for small problems and
    for exercising identities that hold for arbitrary positive-definite kernels.
    """

    def __init__(self, fn, dim=1, tag="user"):
        self.fn = fn
        self.dim = int(dim)
        self.tag = tag

    def cross(self, xs, ys):
        xs = self._points(xs)
        ys = self._points(ys)
        out = np.empty((xs.shape[0], ys.shape[0]))
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                out[i, j] = self.fn(x, y)
        return out

    def diag(self, xs):
        xs = self._points(xs)
        return np.array([self.fn(x, x) for x in xs], dtype=float)

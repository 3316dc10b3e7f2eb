"""Gram matrices, jittered Cholesky factors and the solves built on them.

Matérn Gram matrices become very ill-conditioned as designs densify. The
factorization therefore tries an escalating ladder of diagonal jitter,
relative to the mean diagonal, and records the level that succeeded so that
every report can disclose it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import DomainError, NotPositiveDefiniteError, NumericalError, SizeLimitError

__all__ = [
    "CholeskyFactor",
    "DEFAULT_JITTER_LEVELS",
    "GramMatrix",
    "JitterPolicy",
    "MAX_GRAM_SIZE",
    "assemble_cross",
    "assemble_gram",
    "cholesky",
    "dump_gram",
    "extend_factor",
    "quadratic_form",
    "trace_product",
]

MAX_GRAM_SIZE = 4096
DEFAULT_JITTER_LEVELS = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    kernel_tag: str = ""
    design_fingerprint: str = ""

    @property
    def n(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class JitterPolicy:
    levels: tuple = DEFAULT_JITTER_LEVELS

    def __post_init__(self):
        if not self.levels or any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise DomainError("jitter levels must be a non-empty increasing sequence")
        if self.levels[0] < 0:
            raise DomainError("jitter levels must be non-negative")


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower-triangular L with L L^T = G + jitter_applied I."""

    L: np.ndarray
    jitter_applied: float = 0.0

    @property
    def n(self):
        return self.L.shape[0]

    def half_solve(self, b):
        """L^{-1} b."""
        return solve_triangular(self.L, b, lower=True, check_finite=False)

    def solve(self, b):
        """(L L^T)^{-1} b."""
        y = self.half_solve(b)
        return solve_triangular(self.L, y, lower=True, trans="T", check_finite=False)


def _check_size(n):
    if n > MAX_GRAM_SIZE:
        raise SizeLimitError(f"N = {n} exceeds the dense limit N <= {MAX_GRAM_SIZE}")


def assemble_cross(kernel, xs, ys):
    """Matrix of kernel values between two point arrays."""
    out = np.asarray(kernel.cross(xs, ys), dtype=float)
    if not np.all(np.isfinite(out)):
        i, j = np.argwhere(~np.isfinite(out))[0]
        raise NumericalError(f"non-finite kernel value at pair ({i}, {j})")
    return out


def assemble_gram(kernel, design):
    """Gram matrix of ``kernel`` on ``design``, exactly symmetric by mirroring."""
    if design.n < 1:
        raise DomainError("cannot assemble a Gram matrix on an empty design")
    _check_size(design.n)
    full = assemble_cross(kernel, design.points, design.points)
    upper = np.triu(full)
    entries = upper + np.triu(full, 1).T
    entries.setflags(write=False)
    return GramMatrix(entries, getattr(kernel, "tag", ""), design.fingerprint())


def _potrf(a):
    c, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    return c, info


def cholesky(g, policy=None):
    """Cholesky factor of ``g`` with the smallest jitter level that succeeds."""
    policy = policy or JitterPolicy()
    a = g.entries if isinstance(g, GramMatrix) else np.asarray(g, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    _check_size(a.shape[0])
    if not np.array_equal(a, a.T):
        raise DomainError("Gram matrix is not symmetric")
    scale = float(np.mean(np.diag(a))) if a.size else 1.0
    info = 0
    for level in policy.levels:
        jitter = level * scale
        shifted = a + jitter * np.eye(a.shape[0]) if jitter else a
        L, info = _potrf(np.array(shifted, order="F"))
        if info == 0 and np.all(np.diag(L) > 0):
            L = np.ascontiguousarray(L)
            L.setflags(write=False)
            return CholeskyFactor(L, jitter)
    raise NotPositiveDefiniteError(
        f"matrix not positive definite at jitter {policy.levels[-1]:g} x mean diagonal "
        f"(failing pivot {info})",
        pivot=int(info),
    )


def trace_product(k, r_factor):
    """tr(K R^{-1}) from two triangular solves per column of K."""
    kk = k.entries if isinstance(k, GramMatrix) else np.asarray(k, dtype=float)
    if kk.shape != (r_factor.n, r_factor.n):
        raise DomainError(f"size mismatch: K is {kk.shape}, factor is {r_factor.n}")
    y = r_factor.half_solve(kk)  # L^{-1} K
    z = r_factor.half_solve(y.T)  # L^{-1} K L^{-T}, using symmetry of K
    return float(np.sum(np.diag(z)))


def quadratic_form(v, r_factor):
    """v^T R^{-1} v = ||L^{-1} v||^2."""
    v = np.asarray(v, dtype=float)
    if v.shape != (r_factor.n,):
        raise DomainError(f"size mismatch: vector of length {v.size}, factor of size {r_factor.n}")
    w = r_factor.half_solve(v)
    return float(w @ w)


def extend_factor(f, new_cross, new_diag, rel_floor=None):
    """Factor of the bordered matrix [[G, c], [c^T, g]] from the factor of G.

    The jitter recorded on ``f`` is applied to the new diagonal entry too.
    Raises :class:`NotPositiveDefiniteError` when the Schur complement
    g - ||L^{-1} c||^2 is not above the floor ``rel_floor * g``.
    """
    new_cross = np.asarray(new_cross, dtype=float)
    if new_cross.shape != (f.n,):
        raise DomainError(f"border of length {new_cross.size} does not match factor size {f.n}")
    floor = (np.finfo(float).eps if rel_floor is None else rel_floor) * abs(new_diag)
    ell = f.half_solve(new_cross) if f.n else np.zeros(0)
    schur = float(new_diag) + f.jitter_applied - float(ell @ ell)
    if not schur > floor:
        raise NotPositiveDefiniteError(
            f"non-positive Schur complement {schur:.3e} when extending to size {f.n + 1}",
            pivot=f.n + 1,
        )
    L = np.zeros((f.n + 1, f.n + 1))
    L[: f.n, : f.n] = f.L
    L[f.n, : f.n] = ell
    L[f.n, f.n] = np.sqrt(schur)
    L.setflags(write=False)
    return CholeskyFactor(L, f.jitter_applied)


def dump_gram(path, g):
    """Write a matrix as text, one row per line, 17 significant digits."""
    a = g.entries if isinstance(g, GramMatrix) else np.asarray(g)
    with open(path, "w") as fh:
        for row in a:
            fh.write(" ".join(format(float(v), ".17g") for v in row))
            fh.write("\n")

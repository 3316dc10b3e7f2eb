"""Observation designs in [0, 1]^d and their geometry.

A design is an *ordered* point set: the sequential decomposition of the
expected scale estimate depends on the order term by term, although its sum
does not.

Midpoint grids in one dimension are listed in van der Corput (bit-reversed
index) order, so that every prefix of length 2^k of a grid with m = 2^K
points is itself an evenly spread grid. In two or more dimensions grids are
listed in row-major order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DesignError, DomainError, SizeLimitError

__all__ = [
    "Design",
    "GeometryReport",
    "QuasiUniformityReport",
    "HALTON_BASES",
    "fill_distance",
    "gen_grid",
    "gen_halton",
    "gen_jittered_grid",
    "geometry",
    "quasi_uniformity_check",
    "radical_inverse",
    "separation_radius",
]

PROVENANCES = ("grid", "halton", "jittered-grid", "user-supplied")
HALTON_BASES = (2, 3, 5, 7, 11, 13)
MAX_POINTS = 1 << 22


@dataclass(frozen=True, eq=False)
class Design:
    points: np.ndarray
    provenance: str = "user-supplied"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise DesignError(f"design points must form an (N, d) array, got shape {pts.shape}")
        if self.provenance not in PROVENANCES:
            raise DesignError(f"unknown provenance {self.provenance!r}")
        if not np.all(np.isfinite(pts)):
            raise DesignError("design contains non-finite coordinates")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise DesignError("design points must lie in the unit hypercube")
        if len(pts) > 1:
            # exact comparison; squared distances can underflow for distinct points
            order = np.lexsort(pts.T[::-1])
            same = np.all(pts[order[1:]] == pts[order[:-1]], axis=1)
            if np.any(same):
                k = int(np.argmax(same))
                i, j = sorted((int(order[k]), int(order[k + 1])))
                raise DesignError(f"design points {i} and {j} coincide")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def prefix(self, n):
        if not 0 <= n <= self.n:
            raise DesignError(f"prefix length {n} outside 0..{self.n}")
        return Design(self.points[:n], self.provenance)

    def permuted(self, order):
        return Design(self.points[np.asarray(order)], self.provenance)

    def is_prefix_of(self, other):
        return (
            self.d == other.d
            and self.n <= other.n
            and np.array_equal(self.points, other.points[: self.n])
        )

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(str(self.points.shape).encode())
        return h.hexdigest()[:16]

    @classmethod
    def empty(cls, d):
        return cls(np.zeros((0, d)), "user-supplied")


def _bit_reversal_order(m):
    bits = max(1, (m - 1).bit_length())
    keys = [int(format(i, f"0{bits}b")[::-1], 2) for i in range(m)]
    return np.argsort(keys, kind="stable")


def gen_grid(d, m):
    """Midpoint grid {(2i-1)/(2m)}^d with N = m^d points."""
    d, m = int(d), int(m)
    if d < 1 or m < 1:
        raise DomainError(f"grid needs d >= 1 and m >= 1, got d={d}, m={m}")
    if m**d > MAX_POINTS:
        raise SizeLimitError(f"grid with {m}^{d} points exceeds the limit of {MAX_POINTS}")
    axis = (2.0 * np.arange(1, m + 1) - 1.0) / (2.0 * m)
    if d == 1:
        pts = axis[_bit_reversal_order(m)][:, None]
    else:
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
    return Design(pts, "grid")


def grid_side(n, d):
    """Points per axis of a grid with exactly n points, or None."""
    m = int(round(n ** (1.0 / d)))
    for cand in (m - 1, m, m + 1):
        if cand >= 1 and cand**d == n:
            return cand
    return None


def radical_inverse(indices, base):
    """Van der Corput radical inverse of non-negative integers in ``base``."""
    idx = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(idx.shape, dtype=float)
    scale = 1.0 / base
    while np.any(idx > 0):
        idx, digit = np.divmod(idx, base)
        out += digit * scale
        scale /= base
    return out


def gen_halton(d, n):
    """First n Halton points (index starting at 1) with prime bases 2, 3, 5, ..."""
    d, n = int(d), int(n)
    if d < 1 or d > len(HALTON_BASES):
        raise DomainError(f"Halton designs support 1 <= d <= {len(HALTON_BASES)}, got {d}")
    if n < 1:
        raise DomainError(f"Halton designs need n >= 1, got {n}")
    if n > MAX_POINTS:
        raise SizeLimitError(f"{n} points exceeds the limit of {MAX_POINTS}")
    k = np.arange(1, n + 1)
    pts = np.stack([radical_inverse(k, b) for b in HALTON_BASES[:d]], axis=1)
    return Design(pts, "halton")


def gen_jittered_grid(d, m, seed, amplitude=0.5):
    """Midpoint grid with each point moved uniformly within ``amplitude`` of its cell half-width."""
    base = gen_grid(d, m)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    half = amplitude / (2.0 * m)
    pts = base.points + rng.uniform(-half, half, size=base.points.shape)
    return Design(np.clip(pts, 0.0, 1.0), "jittered-grid")


@dataclass(frozen=True)
class GeometryReport:
    n: int
    fill_distance: float
    separation_radius: float
    ratio: float
    resolution_used: int | None = field(default=None)


def _default_resolution(d):
    return max(2, int(round(2.0e5 ** (1.0 / d))))


def fill_distance(design, resolution=None):
    """Fill distance sup_x min_n ||x - x_n|| over [0, 1]^d.

    Exact in one dimension. In higher dimensions the supremum is replaced by a
    maximum over a tensor grid of ``resolution`` points per axis (corners
    included); the result is then a lower bound within one grid diagonal of
    the true value.
    """
    if design.n < 1:
        raise DesignError("fill distance needs at least one point")
    if design.d == 1:
        x = np.sort(design.points[:, 0])
        gaps = np.diff(x)
        candidates = [x[0], 1.0 - x[-1]]
        if gaps.size:
            candidates.append(0.5 * float(gaps.max()))
        return float(max(candidates))
    res = _default_resolution(design.d) if resolution is None else int(resolution)
    if res < 2:
        raise DomainError(f"fill-distance search needs resolution >= 2, got {res}")
    return _grid_search_fill(design.points, res)


def _grid_search_fill(points, res):
    d = points.shape[1]
    axis = np.linspace(0.0, 1.0, res)
    tree = cKDTree(points)
    best = 0.0
    # stream the candidate grid one slab at a time to bound memory
    rest = np.stack([g.ravel() for g in np.meshgrid(*([axis] * (d - 1)), indexing="ij")], axis=1)
    for a in axis:
        cand = np.column_stack([np.full(len(rest), a), rest])
        dist, _ = tree.query(cand)
        best = max(best, float(dist.max()))
    return best


def separation_radius(design):
    """Half the minimum pairwise distance (exact, via a k-d tree)."""
    if design.n < 2:
        raise DesignError("separation radius needs at least two points")
    dist, _ = cKDTree(design.points).query(design.points, k=2)
    return 0.5 * float(dist[:, 1].min())


def geometry(design, resolution=None):
    h = fill_distance(design, resolution)
    q = separation_radius(design) if design.n >= 2 else math.nan
    res = None if design.d == 1 else (_default_resolution(design.d) if resolution is None else int(resolution))
    return GeometryReport(design.n, h, q, h / q if q > 0 else math.nan, res)


@dataclass(frozen=True)
class QuasiUniformityReport:
    sizes: tuple
    fill_distances: tuple
    products: tuple
    spread: float
    bound: float
    quasi_uniform: bool


def quasi_uniformity_check(designs, bound=4.0, resolution=None):
    """Tabulate h_N N^{1/d} over a family of designs and flag bounded spread.

    The family is flagged quasi-uniform when max/min of the product is at most
    ``bound``.
    """
    designs = list(designs)
    if len(designs) < 3:
        raise DomainError("quasi-uniformity check needs at least three designs")
    d = designs[0].d
    sizes = tuple(des.n for des in designs)
    fills = tuple(fill_distance(des, resolution) for des in designs)
    prods = tuple(h * n ** (1.0 / d) for h, n in zip(fills, sizes))
    spread = max(prods) / min(prods)
    return QuasiUniformityReport(sizes, fills, prods, spread, float(bound), spread <= bound)

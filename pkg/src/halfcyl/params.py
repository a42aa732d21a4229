"""Free parameters of the half-cylindrical warp: a0, b0, target height and focal length."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AmbiguousSide, DegenerateDepth, EmptyNonOverlap, InvalidBracket, VerticalLayout
from .geometry import Homography, Side

INV_PHI = (math.sqrt(5) - 1) / 2


def target_quad(h: Homography, tgt_dims):
    """Warped outline of the target's pixel footprint, corners in drawing order.

    The footprint runs from 0.5 to w + 0.5 so that an unwarped target is
    exactly ``h_t`` pixels tall.
    """
    w, ht = tgt_dims
    cx = np.array([0.5, w + 0.5, w + 0.5, 0.5])
    cy = np.array([0.5, 0.5, ht + 0.5, ht + 0.5])
    d = h.depth(cx, cy)
    if np.any(np.abs(d) < 1e-12) or not (np.all(d > 0) or np.all(d < 0)):
        raise DegenerateDepth("target footprint crosses the horizon line of H")
    return np.column_stack(h.map(cx, cy))


def choose_a0(h: Homography, ref_dims, tgt_dims, tolerance=0.05):
    """Partition abscissa and side from where the warped target lands."""
    w_r, h_r = ref_dims
    quad = target_quad(h, tgt_dims)
    cx, cy = quad.mean(axis=0)
    dx = cx - (w_r + 1) / 2.0
    dy = cy - (h_r + 1) / 2.0
    if abs(dy) > abs(dx) and abs(dy) > tolerance * h_r:
        raise VerticalLayout("target is displaced mostly vertically; only horizontal stitching is supported")
    if abs(dx) <= tolerance * w_r:
        raise AmbiguousSide(f"warped target centroid is {dx:+.1f} px from the reference center")
    if dx > 0:
        return float(w_r), Side.CYL_RIGHT_OF_LINE
    return 1.0, Side.CYL_LEFT_OF_LINE


def boundary_offsets(h: Homography, tgt_dims):
    """Ordinates of the left and right target boundaries under H, rows 1..h_t."""
    w, ht = tgt_dims
    rows = np.arange(1, ht + 1, dtype=float)
    _, yl = h.map(np.ones_like(rows), rows)
    _, yr = h.map(np.full_like(rows, w), rows)
    return yl, yr


def estimate_b0(h: Homography, tgt_dims) -> float:
    """Midpoint of the boundary pair with the smallest vertical offset (first row on ties)."""
    yl, yr = boundary_offsets(h, tgt_dims)
    k = int(np.argmin(np.abs(yl - yr)))
    return float((yl[k] + yr[k]) / 2.0)


@dataclass
class ColumnHeights:
    """Heights of the warped target along vertical lines, x increasing."""

    x: np.ndarray
    h: np.ndarray
    a0: float

    def __len__(self):
        return len(self.x)

    def edge_heights(self):
        """(height at the partition end, height at the far end)."""
        if abs(self.x[0] - self.a0) <= abs(self.x[-1] - self.a0):
            return float(self.h[0]), float(self.h[-1])
        return float(self.h[-1]), float(self.h[0])


def vertical_extent(quad, x):
    """Length of the intersection of each line ``X = x`` with a convex polygon."""
    x = np.asarray(x, dtype=float)
    lo = np.full(x.shape, np.inf)
    hi = np.full(x.shape, -np.inf)
    n = len(quad)
    for i in range(n):
        (x1, y1), (x2, y2) = quad[i], quad[(i + 1) % n]
        if x1 == x2:
            hit = x == x1
            lo = np.where(hit, np.minimum(lo, min(y1, y2)), lo)
            hi = np.where(hit, np.maximum(hi, max(y1, y2)), hi)
            continue
        t = (x - x1) / (x2 - x1)
        hit = (t >= 0) & (t <= 1)
        y = y1 + t * (y2 - y1)
        lo = np.where(hit, np.minimum(lo, y), lo)
        hi = np.where(hit, np.maximum(hi, y), hi)
    return np.where(hi > lo, hi - lo, 0.0)


def column_heights(h: Homography, tgt_dims, a0, side: Side, n_columns: Optional[int] = None) -> ColumnHeights:
    """Sample the warped target's height across its non-overlap extent.

    Columns run from the partition line to the far edge, i.e. the image of
    the target's outer boundary column. When that edge is slanted the span
    stops at its inner end, so no column falls in the tapering wedge.
    ``n_columns`` defaults to the target width; zero-height columns are dropped.
    """
    quad = target_quad(h, tgt_dims)
    n = n_columns or tgt_dims[0]
    if side is Side.CYL_RIGHT_OF_LINE:
        far = min(quad[1, 0], quad[2, 0])
        if far <= a0:
            raise EmptyNonOverlap("warped target does not extend right of the partition line")
        xs = np.linspace(a0, far, n)
    else:
        far = max(quad[0, 0], quad[3, 0])
        if far >= a0:
            raise EmptyNonOverlap("warped target does not extend left of the partition line")
        xs = np.linspace(far, a0, n)
    hs = vertical_extent(quad, xs)
    keep = hs > 1e-9
    if not keep.any():
        raise EmptyNonOverlap("no column of the warped target lies past the partition line")
    return ColumnHeights(xs[keep], hs[keep], float(a0))


def compute_hD(h_t, h1, hw) -> float:
    return float(max(h_t, (h1 + hw + 2.0 * h_t) / 4.0))


def height_after_cyl(f, x, a0, h):
    """Column height after the cylindrical warp; independent of b0 and of the column's top."""
    x = np.asarray(x, dtype=float)
    return f * (np.asarray(h, dtype=float) - 1.0) / np.sqrt((x - a0) ** 2 + f * f) + 1.0


@dataclass
class FocalSearchConfig:
    f_min: float
    f_max: float
    tolerance: float = 0.5
    grid_points: int = 64

    def __post_init__(self):
        if not self.f_min > 0:
            raise InvalidBracket("f_min must be positive")
        if not self.f_min < self.f_max:
            raise InvalidBracket(f"empty focal bracket [{self.f_min}, {self.f_max}]")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.grid_points < 3:
            raise ValueError("grid_points must be at least 3")

    @classmethod
    def for_width(cls, w_ref, f_max=None, **kw):
        return cls(w_ref / 8.0, f_max if f_max is not None else 32.0 * w_ref, **kw)


def focal_objective(f, ch: ColumnHeights, hD):
    r = height_after_cyl(f, ch.x, ch.a0, ch.h) - hD
    return float(np.dot(r, r))


def golden_section(fun, lo, hi, xtol):
    """Minimize a unimodal ``fun`` on [lo, hi]; returns (x, fun(x))."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fun(d)
    return (c, fc) if fc <= fd else (d, fd)


def estimate_focal(ch: ColumnHeights, a0, hD, cfg: FocalSearchConfig):
    """Least-squares focal length for the target height ``hD``.

    Geometric grid scan, then golden-section refinement inside the best grid
    cell. Returns ``(f, degenerate)``; ``degenerate`` means the optimum sits
    at ``f_max`` and no bending is called for.
    """
    if not cfg.f_min < cfg.f_max:
        raise InvalidBracket(f"empty focal bracket [{cfg.f_min}, {cfg.f_max}]")
    if len(ch) == 0:
        raise EmptyNonOverlap("no column heights to fit")
    if ch.a0 != a0:
        ch = ColumnHeights(ch.x, ch.h, float(a0))
    grid = np.geomspace(cfg.f_min, cfg.f_max, cfg.grid_points)
    vals = np.array([focal_objective(f, ch, hD) for f in grid])
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    # refine far below `tolerance` so zero-residual optima are actually reached
    xtol = min(cfg.tolerance, 1e-12 * hi)
    f, val = golden_section(lambda f: focal_objective(f, ch, hD), lo, hi, xtol)
    if vals[k] <= val:
        f, val = float(grid[k]), float(vals[k])
    degenerate = bool(cfg.f_max - f <= cfg.tolerance)
    return float(f), degenerate

"""Ratio-preserving pixel selection for the non-overlap side of the warp.

Each target row is sampled at ``floor(s * w)`` evenly spaced abscissas. The
samples that land past the partition line are re-spaced one canvas pixel
apart, keep their warped ordinate, and are filled by inverse mapping plus
bilinear interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ScaleTooSmall
from .geometry import HalfCylWarp, ImageGrid, Point2, sample_bilinear


@dataclass
class SampleGrid:
    """Sample abscissas ``xs`` (shared by every row) and rows ``ts``.

    After :func:`filter_nonoverlap`, ``keep`` flags the samples inside the
    cylindrical region and ``warped_x``/``warped_y`` hold their images.
    """

    s: float
    n: int
    xs: np.ndarray
    ts: np.ndarray
    keep: Optional[np.ndarray] = None
    warped_x: Optional[np.ndarray] = None
    warped_y: Optional[np.ndarray] = None

    @property
    def retained(self):
        """Retained sample count per row."""
        if self.keep is None:
            return np.full(len(self.ts), self.n)
        return self.keep.sum(axis=1)

    def is_empty(self):
        return self.keep is not None and not self.keep.any()


@dataclass
class ResampledStrip:
    """Ratio-preserved strip.

    Strip column ``j`` (0-based) sits at canvas x = ``anchor.x + direction * (j + 1)``
    and strip row ``r`` at canvas y = ``anchor.y + r``. ``placed_y``,
    ``source_x`` and ``source_y`` are (h_t, width) per-row records of the
    placed samples (NaN past each row's run).
    """

    image: ImageGrid
    anchor: Point2
    direction: int
    placed_y: np.ndarray
    source_x: np.ndarray
    source_y: np.ndarray
    row_widths: np.ndarray

    @property
    def width(self):
        return self.image.width

    def canvas_columns(self):
        return self.anchor.x + self.direction * np.arange(1, self.width + 1)

    def canvas_rows(self):
        return self.anchor.y + np.arange(self.image.height)


def build_sample_grid(tgt_dims, s) -> SampleGrid:
    w, ht = tgt_dims
    if not s > 0:
        raise ScaleTooSmall(f"selection scale must be positive, got {s}")
    n = int(np.floor(s * w))
    if n < 1:
        raise ScaleTooSmall(f"floor({s} * {w}) = {n} samples per row")
    xs = np.arange(1, n + 1) * (w / n)
    return SampleGrid(float(s), n, xs, np.arange(1, ht + 1, dtype=float))


def _first_run(mask):
    """Keep only the first contiguous run of True in each row."""
    started = np.cumsum(mask, axis=1) > 0
    broke = np.cumsum(started & ~mask, axis=1) > 0
    return mask & ~broke


def filter_nonoverlap(g: SampleGrid, t: HalfCylWarp) -> SampleGrid:
    X, Y = np.meshgrid(g.xs, g.ts)
    WX, WY = t.forward(X, Y, strict=False)
    keep = t.in_cyl_region(np.nan_to_num(WX, nan=t.a0))
    # order samples outward from the partition line before taking the run
    if _outward_reversed(WX, t):
        keep = _first_run(keep[:, ::-1])[:, ::-1]
    else:
        keep = _first_run(keep)
    return SampleGrid(g.s, g.n, g.xs, g.ts, keep, np.where(keep, WX, np.nan), np.where(keep, WY, np.nan))


def _outward_reversed(WX, t):
    """True when increasing sample index moves toward the partition line."""
    row = WX[len(WX) // 2]
    row = row[np.isfinite(row)]
    if len(row) < 2:
        return False
    return (row[-1] - row[0]) * t.side.sign < 0


def resample_strip(tgt: ImageGrid, t: HalfCylWarp, g: SampleGrid) -> ResampledStrip:
    """Place retained samples one pixel apart and fill the strip by backward lookup.

    The inverse warp of a sample's image (x'', y'') is the sample itself,
    (x_i, t), so the source positions are taken from the grid directly.
    """
    if g.keep is None:
        g = filter_nonoverlap(g, t)
    if g.is_empty():
        raise ValueError("no samples fall in the non-overlap region")
    ht = len(g.ts)
    counts = g.retained
    width = int(counts.max())
    reversed_ = _outward_reversed(g.warped_x, t)

    # runs are contiguous, so placed column j of row r is run sample first[r] + j
    keep = g.keep[:, ::-1] if reversed_ else g.keep
    wy = g.warped_y[:, ::-1] if reversed_ else g.warped_y
    xs = g.xs[::-1] if reversed_ else g.xs
    first = np.argmax(keep, axis=1)
    j = np.arange(width)
    have = j[None, :] < counts[:, None]
    idx = np.minimum(first[:, None] + j[None, :], g.n - 1)
    placed_y = np.where(have, np.take_along_axis(wy, idx, axis=1), np.nan)
    src_x = np.where(have, xs[idx], np.nan)
    src_y = np.where(have, g.ts[:, None], np.nan)

    y_top = int(np.floor(np.nanmin(placed_y)))
    y_bot = int(np.ceil(np.nanmax(placed_y)))
    height = y_bot - y_top + 1

    # backward lookup per strip column: canvas row -> fractional source position.
    # Work column-major so every column is one contiguous run.
    have_t = have.T
    py = placed_y.T[have_t] - y_top
    sxs = src_x.T[have_t]
    sys_ = src_y.T[have_t]
    per_col = have_t.sum(axis=1)
    cols = np.repeat(j, per_col)
    same = cols[1:] == cols[:-1]
    if np.any(np.diff(py)[same] <= 0):
        order = np.lexsort((py, cols))
        py, sxs, sys_ = py[order], sxs[order], sys_[order]
    ends = np.cumsum(per_col)
    starts = ends - per_col
    present = per_col > 0
    lo = np.zeros(width, dtype=int)
    hi = np.full(width, -1)
    lo[present] = np.ceil(py[starts[present]]).astype(int)
    hi[present] = np.floor(py[ends[present] - 1]).astype(int)
    n_q = np.maximum(hi - lo + 1, 0)
    qc = np.repeat(j, n_q)
    qY = np.arange(n_q.sum()) - np.repeat(np.cumsum(n_q) - n_q, n_q) + np.repeat(lo, n_q)
    # bracket each query inside its own column's run
    span = float(height + 2)
    k = np.searchsorted(cols * span + py, qc * span + qY, side="right") - 1
    k1 = np.minimum(k + 1, np.repeat(ends, n_q) - 1)
    den = py[k1] - py[k]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(den > 0, (qY - py[k]) / den, 0.0)
    qx = np.full((width, height), np.nan)
    qy = np.full((width, height), np.nan)
    qx[qc, qY] = sxs[k] + frac * (sxs[k1] - sxs[k])
    qy[qc, qY] = sys_[k] + frac * (sys_[k1] - sys_[k])
    vals, ok = sample_bilinear(tgt, qx, qy)
    image = ImageGrid(np.ascontiguousarray(vals.transpose(1, 0, 2)), np.ascontiguousarray(ok.T))
    return ResampledStrip(image, Point2(float(t.a0), float(y_top)), t.side.sign, placed_y, src_x, src_y, counts)

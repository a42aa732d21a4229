"""Canvas layout, rendering, seam search and blending."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyCanvas, NoOverlap
from .geometry import HalfCylWarp, Homography, ImageGrid, sample_bilinear
from .resample import ResampledStrip


@dataclass(frozen=True)
class Canvas:
    """Integer raster; canvas pixel (row, col) sits at (x0 + col, y0 + row)."""

    x0: int
    y0: int
    width: int
    height: int

    @property
    def bounds(self):
        """(x_min, y_min, x_max, y_max), inclusive."""
        return self.x0, self.y0, self.x0 + self.width - 1, self.y0 + self.height - 1

    def grid(self):
        xs = self.x0 + np.arange(self.width, dtype=float)
        ys = self.y0 + np.arange(self.height, dtype=float)
        return np.meshgrid(xs, ys)


class Label(enum.IntEnum):
    FROM_REFERENCE = 0
    FROM_TARGET = 1


def _clip_halfplane(poly, a0, keep_left):
    """Clip a polygon to x <= a0 (keep_left) or x >= a0."""
    out = []
    n = len(poly)
    inside = (lambda p: p[0] <= a0) if keep_left else (lambda p: p[0] >= a0)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        if inside(p):
            out.append(p)
        if inside(p) != inside(q):
            t = (a0 - p[0]) / (q[0] - p[0])
            out.append((a0, p[1] + t * (q[1] - p[1])))
    return np.array(out).reshape(-1, 2)


def _pixel_quad(h: Homography, tgt_dims):
    w, ht = tgt_dims
    cx = np.array([1.0, w, w, 1.0])
    cy = np.array([1.0, 1.0, ht, ht])
    return np.column_stack(h.map(cx, cy))


def canvas_bounds(ref_dims, warp: HalfCylWarp, tgt_dims, strip: Optional[ResampledStrip] = None) -> Canvas:
    """Union of the reference, the homography-rendered target part and the strip."""
    w_r, h_r = ref_dims
    if min(w_r, h_r, *tgt_dims) < 1:
        raise EmptyCanvas("empty input dimensions")
    pts = [np.array([[1.0, 1.0], [w_r, h_r]])]
    quad = _pixel_quad(warp.h, tgt_dims)
    if strip is None:
        pts.append(quad)
    else:
        clipped = _clip_halfplane(quad, warp.a0, keep_left=warp.side.sign > 0)
        if len(clipped):
            pts.append(clipped)
        cols = strip.canvas_columns()
        rows = strip.canvas_rows()
        pts.append(np.array([[cols.min(), rows.min()], [cols.max(), rows.max()]]))
    allp = np.vstack(pts)
    x_min, y_min = np.floor(allp.min(axis=0)).astype(int)
    x_max, y_max = np.ceil(allp.max(axis=0)).astype(int)
    return Canvas(int(x_min), int(y_min), int(x_max - x_min + 1), int(y_max - y_min + 1))


def render_reference(ref: ImageGrid, canvas: Canvas) -> ImageGrid:
    out = ImageGrid.blank(canvas.height, canvas.width, ref.channels)
    r0, c0 = 1 - canvas.y0, 1 - canvas.x0
    out.samples[r0 : r0 + ref.height, c0 : c0 + ref.width] = ref.samples
    out.valid[r0 : r0 + ref.height, c0 : c0 + ref.width] = ref.valid
    return out


def _backward_homography(tgt, h_inv, X, Y, sign):
    """Sample ``tgt`` at H^-1 of canvas points, rejecting points behind the camera."""
    d = h_inv.depth(X, Y)
    with np.errstate(invalid="ignore", divide="ignore"):
        sx, sy = h_inv.map(X, Y, strict=False)
    sx = np.where(d * sign > 0, sx, np.nan)
    return sample_bilinear(tgt, sx, sy)


def _depth_sign(h_inv, tgt_dims, h):
    cx, cy = (tgt_dims[0] + 1) / 2.0, (tgt_dims[1] + 1) / 2.0
    X, Y = h.map(cx, cy)
    return np.sign(h_inv.depth(X, Y))


def render_target(tgt: ImageGrid, warp: HalfCylWarp, strip: Optional[ResampledStrip], canvas: Canvas) -> ImageGrid:
    """Homography branch by backward mapping, non-overlap side from the strip.

    Without a strip the whole target is rendered by the homography.
    """
    out = ImageGrid.blank(canvas.height, canvas.width, tgt.channels)
    h_inv = warp.h.inverse()
    sign = _depth_sign(h_inv, tgt.dims, warp.h)

    quad = _pixel_quad(warp.h, tgt.dims)
    if strip is not None:
        quad = _clip_halfplane(quad, warp.a0, keep_left=warp.side.sign > 0)
    if len(quad):
        xa, ya = np.floor(quad.min(axis=0)).astype(int)
        xb, yb = np.ceil(quad.max(axis=0)).astype(int)
        xa, xb = max(xa, canvas.x0), min(xb, canvas.x0 + canvas.width - 1)
        ya, yb = max(ya, canvas.y0), min(yb, canvas.y0 + canvas.height - 1)
        if strip is not None:
            if warp.side.sign > 0:
                xb = min(xb, int(np.floor(warp.a0)))
            else:
                xa = max(xa, int(np.ceil(warp.a0)))
        if xa <= xb and ya <= yb:
            X, Y = np.meshgrid(np.arange(xa, xb + 1, dtype=float), np.arange(ya, yb + 1, dtype=float))
            vals, ok = _backward_homography(tgt, h_inv, X, Y, sign)
            rs = slice(ya - canvas.y0, yb - canvas.y0 + 1)
            cs = slice(xa - canvas.x0, xb - canvas.x0 + 1)
            out.samples[rs, cs] = vals
            out.valid[rs, cs] = ok

    if strip is not None:
        cols = (strip.canvas_columns() - canvas.x0).astype(int)
        r0 = int(strip.anchor.y) - canvas.y0
        rows = slice(r0, r0 + strip.image.height)
        s_img, s_ok = strip.image.samples, strip.image.valid
        if strip.direction < 0:
            s_img, s_ok = s_img[:, ::-1], s_ok[:, ::-1]
        cs = slice(cols.min(), cols.max() + 1)
        dst_s = out.samples[rows, cs]
        dst_s[s_ok] = s_img[s_ok]
        out.valid[rows, cs] |= s_ok
    return out


def render_half_cylindrical(tgt: ImageGrid, warp: HalfCylWarp, canvas: Canvas) -> ImageGrid:
    """Plain half-cylindrical rendering without pixel selection (for comparison)."""
    X, Y = canvas.grid()
    with np.errstate(invalid="ignore", divide="ignore"):
        sx, sy = warp.inverse(X, Y, strict=False)
    vals, ok = sample_bilinear(tgt, sx, sy)
    return ImageGrid(vals, ok)


def downscale(img: ImageGrid, factor: int) -> ImageGrid:
    """Box-filter average over factor x factor blocks (edge blocks may be partial).

    A block is valid only if every pixel it covers is valid.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return ImageGrid(img.samples.copy(), img.valid.copy())
    h, w, _ = img.samples.shape
    r = np.arange(0, h, factor)
    c = np.arange(0, w, factor)
    n = np.outer(np.diff(np.append(r, h)), np.diff(np.append(c, w)))
    s = np.add.reduceat(np.add.reduceat(img.samples, r, axis=0), c, axis=1)
    s /= n[:, :, None]
    if img.valid.all():
        return ImageGrid(s, np.ones(n.shape, dtype=bool))
    bad = np.add.reduceat(np.add.reduceat((~img.valid).astype(np.int32), r, axis=0), c, axis=1)
    return ImageGrid(s, bad == 0)


@dataclass
class SeamLabels:
    """Per-pixel source labels; ``cut[r]`` is the first column given to the right image.

    ``right`` names the source on the right-hand side of the seam.
    """

    cut: np.ndarray
    width: int
    right: Label = Label.FROM_TARGET

    @property
    def height(self):
        return len(self.cut)

    @property
    def label(self):
        cols = np.arange(self.width)[None, :]
        right_side = cols >= self.cut[:, None]
        left = Label.FROM_REFERENCE if self.right is Label.FROM_TARGET else Label.FROM_TARGET
        return np.where(right_side, int(self.right), int(left)).astype(np.uint8)

    def transitions(self):
        return (np.diff(self.label.astype(int), axis=1) != 0).sum(axis=1)


# cost charged for routing the seam through pixels outside the overlap
OUTSIDE_COST = 1e6


def seam_energy(a: ImageGrid, b: ImageGrid):
    return ((a.samples - b.samples) ** 2).sum(axis=2)


def dp_seam(energy):
    """Minimal 8-connected top-to-bottom path; ties go to the lexicographically
    smallest column sequence read top-down. Returns (columns, cost)."""
    e = np.asarray(energy, dtype=float)
    h, w = e.shape
    togo = np.empty_like(e)
    togo[-1] = e[-1]
    pad = np.full(w + 2, np.inf)
    for r in range(h - 2, -1, -1):
        pad[1:-1] = togo[r + 1]
        togo[r] = e[r] + np.minimum(np.minimum(pad[:-2], pad[1:-1]), pad[2:])
    path = np.empty(h, dtype=int)
    path[0] = int(np.argmin(togo[0]))
    for r in range(1, h):
        c = path[r - 1]
        lo = max(c - 1, 0)
        path[r] = lo + int(np.argmin(togo[r, lo : min(c + 2, w)]))
    return path, float(togo[0, path[0]])


def find_seam(a: ImageGrid, b: ImageGrid, overlap, right: Label = Label.FROM_TARGET) -> SeamLabels:
    """Seam between left image ``a`` and right image ``b`` over the overlap mask.

    Rows outside the overlap's row span get a cut at the span's first/last
    cut; pixels outside the overlap inside the span are expensive, not forbidden.
    """
    overlap = np.asarray(overlap, dtype=bool)
    if a.samples.shape != b.samples.shape or overlap.shape != a.valid.shape:
        raise ValueError("seam inputs must share one raster")
    if not overlap.any():
        raise NoOverlap("images do not overlap")
    rows = np.nonzero(overlap.any(axis=1))[0]
    colsn = np.nonzero(overlap.any(axis=0))[0]
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = colsn[0], colsn[-1] + 1
    e = seam_energy(a, b)[r0:r1, c0:c1]
    e = np.where(overlap[r0:r1, c0:c1], e, OUTSIDE_COST)
    path, _ = dp_seam(e)
    cut = np.empty(a.height, dtype=int)
    cut[r0:r1] = path + c0
    cut[:r0] = cut[r0]
    cut[r1:] = cut[r1 - 1]
    return SeamLabels(cut, a.width, right)


def upscale_labels(labels: SeamLabels, factor: int, shape=None) -> SeamLabels:
    """Nearest-neighbor expansion; ``shape`` = (height, width) crops the result."""
    factor = int(factor)
    cut = np.repeat(labels.cut * factor, factor)
    width = labels.width * factor
    if shape is not None:
        cut = cut[: shape[0]]
        width = shape[1]
    return SeamLabels(np.minimum(cut, width), width, labels.right)


def blend(ref_render: ImageGrid, tgt_render: ImageGrid, labels: SeamLabels, feather: int = 0) -> ImageGrid:
    """Hard cut along the seam inside the overlap; elsewhere whichever input is valid.

    ``feather`` > 0 linearly mixes both inputs within that many pixels of the cut.
    """
    rv, tv = ref_render.valid, tgt_render.valid
    both = rv & tv
    lab = labels.label
    use_tgt = np.where(both, lab == Label.FROM_TARGET, tv & ~rv)
    out = np.where(use_tgt[:, :, None], tgt_render.samples, ref_render.samples)
    if feather > 0:
        cols = np.arange(labels.width)[None, :]
        d = (cols - labels.cut[:, None] + 0.5) / (2.0 * feather) + 0.5
        wt = np.clip(d, 0.0, 1.0)
        if labels.right is not Label.FROM_TARGET:
            wt = 1.0 - wt
        mixed = wt[:, :, None] * tgt_render.samples + (1 - wt[:, :, None]) * ref_render.samples
        out = np.where(both[:, :, None], mixed, out)
    return ImageGrid(out, rv | tv)

"""End-to-end two-image stitching, image I/O, synthetic pairs and timing."""
from __future__ import annotations

import io
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from PIL import Image

from . import compositor as comp
from .errors import EXIT_CODES, InvalidOverlap, StitchError
from .geometry import HalfCylWarp, Homography, ImageGrid, CylindricalParams, sample_bilinear
from .params import (
    FocalSearchConfig,
    choose_a0,
    column_heights,
    compute_hD,
    estimate_b0,
    estimate_focal,
    height_after_cyl,
)
from .registration import (
    MatchConfig,
    RansacConfig,
    alignment_rmse,
    detect_and_match,
    estimate_homography_ransac,
    fit_similarity,
    selection_scale,
)
from .resample import build_sample_grid, filter_nonoverlap, resample_strip

log = logging.getLogger(__name__)


class PipelineError(Exception):
    """A stage failure; ``exit_code`` follows the CLI convention."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = EXIT_CODES.get(stage, 1)


# ---------------------------------------------------------------- image I/O


def load_image(path) -> ImageGrid:
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB", "RGBA"):
                im = im.convert("RGBA" if "A" in im.getbands() else "RGB")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except (OSError, ValueError) as e:
        raise PipelineError("io", f"cannot read {path}: {e}") from e
    return ImageGrid.from_array(arr)


def to_uint8(img: ImageGrid):
    """Round half-up to 8 bits; invalid pixels are black."""
    v = np.floor(np.clip(img.samples, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    v[~img.valid] = 0
    return v[:, :, 0] if img.channels == 1 else v


def encode_png(img: ImageGrid) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="PNG")
    return buf.getvalue()


def encode_mask(mask) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def _write(path, data: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as e:
        raise PipelineError("io", f"cannot write {path}: {e}") from e


def save_image(img: ImageGrid, path):
    _write(path, encode_png(img))


# ------------------------------------------------------------ configuration


@dataclass
class StitchConfig:
    seam_scale: int = 8
    ransac: RansacConfig = field(default_factory=RansacConfig)
    focal_search: Optional[FocalSearchConfig] = None  # None: derived from the reference width
    f_max: Optional[float] = None
    matching: MatchConfig = field(default_factory=MatchConfig)
    feather: bool = False
    save_intermediate: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.seam_scale < 1 or self.seam_scale & (self.seam_scale - 1):
            raise ValueError("seam_scale must be a power of two")


@dataclass
class StitchReport:
    homography: list
    similarity: dict
    scale: float
    a0: float
    b0: float
    focal: float
    degenerate_focal: bool
    inlier_count: int
    alignment_rmse_px: float
    warp_time_s: float
    seam_time_s: float
    total_time_s: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


@dataclass
class StitchResult:
    image: ImageGrid
    report: StitchReport
    homography: Homography
    warp: HalfCylWarp
    strip: Optional[comp.ResampledStrip]
    canvas: comp.Canvas
    ref_render: ImageGrid
    tgt_render: ImageGrid
    labels: comp.SeamLabels
    matches: object
    heights: object
    h_target: float
    n_samples: int


def _stage(name):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, et, ev, tb):
            if ev is not None and isinstance(ev, StitchError) and not isinstance(ev, PipelineError):
                raise PipelineError(name, f"{type(ev).__name__}: {ev}") from ev
            return False

    return _Ctx()


def _match_channels(a: ImageGrid, b: ImageGrid):
    if a.channels == b.channels:
        return a, b

    def rgb(g):
        if g.channels == 1:
            return ImageGrid(np.repeat(g.samples, 3, axis=2), g.valid)
        return ImageGrid(g.samples[:, :, :3], g.valid)

    return rgb(a), rgb(b)


def stitch_images(ref: ImageGrid, tgt: ImageGrid, cfg: Optional[StitchConfig] = None) -> StitchResult:
    """Stitch ``tgt`` onto the fixed reference ``ref``."""
    cfg = cfg or StitchConfig()
    ref, tgt = _match_channels(ref, tgt)
    t_start = time.perf_counter()

    with _stage("registration"):
        matches = detect_and_match(ref, tgt, cfg.matching)
        H, inl = estimate_homography_ransac(matches, cfg.ransac)
        src, dst = matches.inliers()
        sim = fit_similarity(src, dst)
        s = selection_scale(sim)
        rmse = alignment_rmse(H, src, dst)
    log.info("homography from %d/%d inliers, rmse %.3f px, s = %.4f", inl.sum(), len(matches), rmse, s)

    t_warp = time.perf_counter()
    with _stage("params"):
        a0, side = choose_a0(H, ref.dims, tgt.dims)
        b0 = estimate_b0(H, tgt.dims)
        ch = column_heights(H, tgt.dims, a0, side)
        h1, hw = ch.edge_heights()
        hD = compute_hD(tgt.height, h1, hw)
        fcfg = cfg.focal_search or FocalSearchConfig.for_width(ref.width, f_max=cfg.f_max)
        f, degenerate = estimate_focal(ch, a0, hD, fcfg)
    log.info("a0 = %g (%s), b0 = %.2f, hD = %.2f, f = %.1f%s", a0, side.value, b0, hD, f, " (degenerate)" if degenerate else "")

    with _stage("rendering"):
        # a degenerate focal means f -> infinity: no bending, but pixel selection still applies
        c = None if degenerate else CylindricalParams(f, a0, b0)
        warp = HalfCylWarp(H, c, side, a0=a0)
        grid = filter_nonoverlap(build_sample_grid(tgt.dims, s), warp)
        n_samples = grid.n
        strip = resample_strip(tgt, warp, grid) if not grid.is_empty() else None
        canvas = comp.canvas_bounds(ref.dims, warp, tgt.dims, strip)
        ref_r = comp.render_reference(ref, canvas)
        tgt_r = comp.render_target(tgt, warp, strip, canvas)
    warp_time = time.perf_counter() - t_warp

    t_seam = time.perf_counter()
    with _stage("rendering"):
        k = cfg.seam_scale
        a_small, b_small = comp.downscale(ref_r, k), comp.downscale(tgt_r, k)
        overlap = a_small.valid & b_small.valid
        right = comp.Label.FROM_TARGET if side.sign > 0 else comp.Label.FROM_REFERENCE
        left_img, right_img = (a_small, b_small) if side.sign > 0 else (b_small, a_small)
        small = comp.find_seam(left_img, right_img, overlap, right)
        labels = comp.upscale_labels(small, k, (canvas.height, canvas.width))
    seam_time = time.perf_counter() - t_seam

    out = comp.blend(ref_r, tgt_r, labels, feather=3 if cfg.feather else 0)
    total = time.perf_counter() - t_start

    report = StitchReport(
        homography=[float(v) for v in H.m.ravel()],
        similarity={"a": sim.a, "b": sim.b, "tx": sim.tx, "ty": sim.ty},
        scale=float(s),
        a0=float(a0),
        b0=float(b0),
        focal=float(f),
        degenerate_focal=bool(degenerate),
        inlier_count=int(inl.sum()),
        alignment_rmse_px=float(rmse),
        warp_time_s=warp_time,
        seam_time_s=seam_time,
        total_time_s=total,
    )
    return StitchResult(out, report, H, warp, strip, canvas, ref_r, tgt_r, labels, matches, ch, hD, n_samples)


def run_stitch(ref_path, tgt_path, out_path, cfg: Optional[StitchConfig] = None, metrics_path=None) -> StitchResult:
    """File-level stitch. Nothing is written unless every stage succeeds."""
    cfg = cfg or StitchConfig()
    ref = load_image(ref_path)
    tgt = load_image(tgt_path)
    res = stitch_images(ref, tgt, cfg)
    png = encode_png(res.image)
    _write(out_path, png)
    if metrics_path:
        _write(metrics_path, res.report.to_json().encode())
    if cfg.save_intermediate:
        save_intermediates(res, ref, tgt, cfg.save_intermediate)
    return res


def save_intermediates(res: StitchResult, ref: ImageGrid, tgt: ImageGrid, directory):
    from PIL import ImageDraw

    os.makedirs(directory, exist_ok=True)
    _write(os.path.join(directory, "mask.png"), encode_mask(res.image.valid))

    # matches: side-by-side with inlier lines
    ref, tgt = _match_channels(ref, tgt)
    hh = max(ref.height, tgt.height)
    side = np.zeros((hh, ref.width + tgt.width, ref.channels))
    side[: ref.height, : ref.width] = ref.samples
    side[: tgt.height, ref.width :] = tgt.samples
    im = Image.fromarray(to_uint8(ImageGrid.from_array(side))).convert("RGB")
    draw = ImageDraw.Draw(im)
    m = res.matches
    for (xt, yt), (xr, yr), ok in zip(m.target, m.reference, m.inlier):
        draw.line([(xr - 1, yr - 1), (xt - 1 + ref.width, yt - 1)], fill=(0, 255, 0) if ok else (255, 0, 0))
    im.save(os.path.join(directory, "matches.png"))

    if res.warp.c is not None:
        before = comp.render_half_cylindrical(tgt, res.warp, res.canvas)
        save_image(before, os.path.join(directory, "target_before_selection.png"))
    save_image(res.tgt_render, os.path.join(directory, "target_after_selection.png"))

    seam = Image.fromarray(to_uint8(res.image)).convert("RGB")
    px = np.asarray(seam).copy()
    rows = np.arange(res.canvas.height)
    cols = np.clip(res.labels.cut, 0, res.canvas.width - 1)
    px[rows, cols] = (255, 0, 0)
    Image.fromarray(px).save(os.path.join(directory, "seam.png"))


# ---------------------------------------------------------- synthetic pairs


def synthetic_texture(height, width, seed=0, channels=3):
    """Multi-octave value noise with scattered rectangles; plenty of corners."""
    rng = np.random.default_rng(seed)
    img = np.zeros((height, width, channels), dtype=np.float32)
    total = 0.0
    for cell, wgt in ((64, 1.0), (24, 0.7), (8, 0.5)):
        gh, gw = height // cell + 3, width // cell + 3
        small = rng.random((gh, gw, channels)).astype(np.float32)
        for ch in range(channels):
            big = Image.fromarray(small[:, :, ch]).resize((gw * cell, gh * cell), Image.BILINEAR)
            img[:, :, ch] += wgt * np.asarray(big)[:height, :width]
        total += wgt
    img /= total
    n_rect = max(8, height * width // 4000)
    for _ in range(n_rect):
        rw, rh = rng.integers(6, 40, size=2)
        x, y = rng.integers(0, max(1, width - rw)), rng.integers(0, max(1, height - rh))
        img[y : y + rh, x : x + rw] = 0.5 * img[y : y + rh, x : x + rw] + 0.5 * rng.random(channels)
    return ImageGrid.from_array(np.clip(img, 0, 1).astype(np.float64))


def centered_perspective(width, height, p, q=0.0):
    """Homography with projective row (p, q) acting about the image center."""
    cx, cy = (width + 1) / 2.0, (height + 1) / 2.0
    C = np.array([[1, 0, cx], [0, 1, cy], [0, 0, 1.0]])
    K = np.array([[1, 0, 0], [0, 1, 0], [p, q, 1.0]])
    return Homography(C @ K @ np.linalg.inv(C))


@dataclass
class SyntheticPair:
    ref: ImageGrid
    tgt: ImageGrid
    h_true: Homography  # target -> reference, including the window offset
    truth_target: np.ndarray
    truth_reference: np.ndarray
    offset: int


def make_synthetic_pair(src: ImageGrid, h_true: Homography, overlap_fraction, window=None, stride=4) -> SyntheticPair:
    """Crop a reference window and a horizontally offset target window from ``src``.

    The target is resampled so that ``h_true`` (acting in target-window
    coordinates) followed by the window offset maps target pixels onto
    reference coordinates. ``window`` is (height, width).
    """
    if not 0.05 < overlap_fraction < 0.95:
        raise InvalidOverlap(f"overlap fraction {overlap_fraction} outside (0.05, 0.95)")
    if window is None:
        window = (int(0.8 * src.height), int(0.8 * src.width / (2.0 - overlap_fraction)))
    wh, ww = window
    dx = int(round((1.0 - overlap_fraction) * ww))
    ox = (src.width - ww - dx) // 2
    oy = (src.height - wh) // 2
    if ox < 0 or oy < 0:
        raise InvalidOverlap("source image too small for the requested windows")

    ref = ImageGrid(src.samples[oy : oy + wh, ox : ox + ww].copy(), src.valid[oy : oy + wh, ox : ox + ww].copy())
    X, Y = np.meshgrid(np.arange(1, ww + 1, dtype=float), np.arange(1, wh + 1, dtype=float))
    qx, qy = h_true.map(X, Y)
    vals, ok = sample_bilinear(src, qx + ox + dx, qy + oy)
    tgt = ImageGrid(vals, ok)

    h_full = Homography.translation(dx, 0) @ h_true
    gx, gy = np.meshgrid(np.arange(1, ww + 1, stride, dtype=float), np.arange(1, wh + 1, stride, dtype=float))
    rx, ry = h_full.map(gx.ravel(), gy.ravel())
    inside = (rx >= 1) & (rx <= ww) & (ry >= 1) & (ry <= wh)
    pts_t = np.column_stack([gx.ravel(), gy.ravel()])[inside]
    pts_r = np.column_stack([rx, ry])[inside]
    return SyntheticPair(ref, tgt, h_full, pts_t, pts_r, dx)


def synthetic_pair(height, width, overlap=0.3, perspective=0.0, seed=0, channels=3) -> SyntheticPair:
    """Texture plus pair in one call; the texture leaves a 10% margin around the windows."""
    src_h = int(np.ceil(height / 0.8))
    src_w = int(np.ceil(width * (2.0 - overlap) / 0.8))
    src = synthetic_texture(src_h, src_w, seed, channels)
    h = centered_perspective(width, height, perspective)
    return make_synthetic_pair(src, h, overlap, window=(height, width))


# ------------------------------------------------------------------- timing


def timing_report(resolutions, cfg: Optional[StitchConfig] = None, runs=3, overlap=0.3, perspective=-1e-4, seed=0):
    """Average warp and total times with the seam at full resolution and at ``cfg.seam_scale``.

    ``resolutions`` holds (height, width) pairs.
    """
    cfg = cfg or StitchConfig()
    full_cfg = StitchConfig(**{**cfg.__dict__, "seam_scale": 1})
    rows = []
    for hgt, wid in resolutions:
        pair = synthetic_pair(hgt, wid, overlap, perspective * 2000.0 / wid, seed)
        res = {"full": [], "resized": []}
        for _ in range(runs):
            for key, c in (("full", full_cfg), ("resized", cfg)):
                r = stitch_images(pair.ref, pair.tgt, c).report
                res[key].append(r)
        mean = lambda key, attr: float(np.mean([getattr(r, attr) for r in res[key]]))
        rows.append(
            {
                "resolution": f"{hgt}x{wid}",
                "warp_time_s": mean("resized", "warp_time_s"),
                "total_time_original_s": mean("full", "total_time_s"),
                "total_time_resized_s": mean("resized", "total_time_s"),
                "seam_time_original_s": mean("full", "seam_time_s"),
                "seam_time_resized_s": mean("resized", "seam_time_s"),
                "seam_scale": cfg.seam_scale,
                "runs": runs,
            }
        )
        log.info("%s", rows[-1])
    return rows


def synthetic_stats(pair: SyntheticPair, H: Homography):
    """RMSE of H against the dense ground-truth correspondences."""
    return alignment_rmse(H, pair.truth_target, pair.truth_reference)


def height_profile(res: StitchResult):
    """Column heights after the cylinder at the estimated focal length."""
    ch = res.heights
    return height_after_cyl(res.report.focal, ch.x, ch.a0, ch.h)

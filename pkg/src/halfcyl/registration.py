"""Correspondences, robust homography estimation and the similarity fit.

Feature detection is pluggable: anything with a ``detect(gray) -> (xy, desc)``
method can be passed as ``MatchConfig.detector``. The default is a Harris
corner detector with normalized gray-level patch descriptors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateConfiguration,
    DegenerateSample,
    NoConsensus,
    SingularMatrix,
    TooFewMatches,
)
from .geometry import Homography, ImageGrid, Similarity


@dataclass
class Feature:
    position: tuple
    descriptor: np.ndarray
    scale: Optional[float] = None
    orientation: Optional[float] = None


@dataclass
class MatchSet:
    """Correspondences ``target[i] <-> reference[i]`` as (n, 2) arrays."""

    target: np.ndarray
    reference: np.ndarray
    inlier: Optional[np.ndarray] = None

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float).reshape(-1, 2)
        self.reference = np.asarray(self.reference, dtype=float).reshape(-1, 2)
        if self.target.shape != self.reference.shape:
            raise ValueError("target and reference point arrays differ in length")

    def __len__(self):
        return len(self.target)

    @property
    def pairs(self):
        return list(zip(map(tuple, self.target), map(tuple, self.reference)))

    def inliers(self):
        if self.inlier is None:
            return self.target, self.reference
        return self.target[self.inlier], self.reference[self.inlier]


@dataclass
class HarrisDetector:
    sigma_d: float = 1.0
    sigma_i: float = 2.0
    k: float = 0.04
    nms_radius: int = 4
    max_features: int = 2000
    rel_threshold: float = 0.001
    patch_radius: int = 6
    patch_sigma: float = 1.5

    def response(self, gray):
        g = ndimage.gaussian_filter(gray, self.sigma_d)
        ix = ndimage.sobel(g, axis=1) / 8.0
        iy = ndimage.sobel(g, axis=0) / 8.0
        sxx = ndimage.gaussian_filter(ix * ix, self.sigma_i)
        syy = ndimage.gaussian_filter(iy * iy, self.sigma_i)
        sxy = ndimage.gaussian_filter(ix * iy, self.sigma_i)
        return sxx * syy - sxy * sxy - self.k * (sxx + syy) ** 2

    def detect(self, gray):
        """Return 1-based subpixel corner positions (n, 2) and descriptors (n, d)."""
        gray = np.asarray(gray, dtype=float)
        R = self.response(gray)
        rmax = R.max()
        if not rmax > 1e-12:
            return np.zeros((0, 2)), np.zeros((0, (2 * self.patch_radius + 1) ** 2))
        border = self.patch_radius + 2
        peaks = (R == ndimage.maximum_filter(R, size=2 * self.nms_radius + 1)) & (R > self.rel_threshold * rmax)
        peaks[:border] = peaks[-border:] = False
        peaks[:, :border] = peaks[:, -border:] = False
        rows, cols = np.nonzero(peaks)
        order = np.lexsort((cols, rows, -R[rows, cols]))[: self.max_features]
        rows, cols = rows[order], cols[order]

        # quadratic peak interpolation along each axis
        c, l, r = R[rows, cols], R[rows, cols - 1], R[rows, cols + 1]
        u, d = R[rows - 1, cols], R[rows + 1, cols]
        den_x = l - 2 * c + r
        den_y = u - 2 * c + d
        ox = np.where(den_x < 0, 0.5 * (l - r) / np.where(den_x < 0, den_x, 1), 0.0)
        oy = np.where(den_y < 0, 0.5 * (u - d) / np.where(den_y < 0, den_y, 1), 0.0)
        ox = np.clip(ox, -0.5, 0.5)
        oy = np.clip(oy, -0.5, 0.5)
        xy = np.column_stack([cols + ox + 1.0, rows + oy + 1.0])
        return xy, self.describe(gray, rows, cols)

    def describe(self, gray, rows, cols):
        g = ndimage.gaussian_filter(gray, self.patch_sigma)
        pr = self.patch_radius
        off = np.arange(-pr, pr + 1)
        patches = g[rows[:, None, None] + off[None, :, None], cols[:, None, None] + off[None, None, :]]
        patches = patches.reshape(len(rows), -1)
        patches = patches - patches.mean(axis=1, keepdims=True)
        norm = np.linalg.norm(patches, axis=1, keepdims=True)
        return patches / np.maximum(norm, 1e-12)


@dataclass
class MatchConfig:
    detector: object = field(default_factory=HarrisDetector)
    ratio: float = 0.8
    mutual: bool = True


def match_descriptors(d_tgt, d_ref, ratio=0.8, mutual=True):
    """Nearest-neighbor matching with the distance-ratio test.

    Returns index pairs (i_tgt, i_ref). Distances are Euclidean so the test
    is invariant to a common positive scaling of all descriptors.
    """
    d_tgt = np.asarray(d_tgt, dtype=float)
    d_ref = np.asarray(d_ref, dtype=float)
    if len(d_tgt) == 0 or len(d_ref) < 2:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    sq = (d_tgt**2).sum(1)[:, None] + (d_ref**2).sum(1)[None, :] - 2.0 * d_tgt @ d_ref.T
    dist = np.sqrt(np.maximum(sq, 0.0))
    nn = np.argmin(dist, axis=1)
    idx = np.arange(len(d_tgt))
    best = dist[idx, nn]
    dist2 = dist.copy()
    dist2[idx, nn] = np.inf
    second = dist2.min(axis=1)
    keep = best < ratio * second
    if mutual:
        back = np.argmin(dist, axis=0)
        keep &= back[nn] == idx
    return idx[keep], nn[keep]


def detect_and_match(ref: ImageGrid, tgt: ImageGrid, cfg: Optional[MatchConfig] = None) -> MatchSet:
    cfg = cfg or MatchConfig()
    xy_r, d_r = cfg.detector.detect(ref.gray())
    xy_t, d_t = cfg.detector.detect(tgt.gray())
    it, ir = match_descriptors(d_t, d_r, cfg.ratio, cfg.mutual)
    if len(it) < 4:
        raise TooFewMatches(f"only {len(it)} candidate matches survived the ratio test")
    return MatchSet(xy_t[it], xy_r[ir])


def _hartley(p):
    c = p.mean(axis=0)
    d = np.sqrt(((p - c) ** 2).sum(1)).mean()
    if d < 1e-12:
        raise DegenerateSample("coincident points")
    s = math.sqrt(2) / d
    T = np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])
    return (p - c) * s, T


def _has_collinear_triple(p, tol=1e-6):
    n = len(p)
    scale = max(np.ptp(p, axis=0).max(), 1e-12) ** 2
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a = (p[j, 0] - p[i, 0]) * (p[k, 1] - p[i, 1]) - (p[j, 1] - p[i, 1]) * (p[k, 0] - p[i, 0])
                if abs(a) <= tol * scale:
                    return True
    return False


def dlt_homography(src, dst) -> Homography:
    """Normalized DLT fit of H with ``dst ~ H src``; needs at least 4 pairs."""
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    n = len(src)
    if n < 4 or len(dst) != n:
        raise DegenerateSample("need at least 4 correspondences")
    if n == 4 and (_has_collinear_triple(src) or _has_collinear_triple(dst)):
        raise DegenerateSample("three sample points are collinear")
    ps, Ts = _hartley(src)
    pd, Td = _hartley(dst)
    x, y = ps[:, 0], ps[:, 1]
    u, v = pd[:, 0], pd[:, 1]
    z, o = np.zeros(n), np.ones(n)
    A = np.empty((2 * n, 9))
    A[0::2] = np.column_stack([-x, -y, -o, z, z, z, u * x, u * y, u])
    A[1::2] = np.column_stack([z, z, z, -x, -y, -o, v * x, v * y, v])
    _, sv, vt = np.linalg.svd(A)
    if n > 4 and sv[7] < 1e-10 * sv[0]:
        raise DegenerateSample("correspondences do not determine a homography")
    Hn = vt[-1].reshape(3, 3)
    try:
        return Homography(np.linalg.inv(Td) @ Hn @ Ts)
    except SingularMatrix as e:
        raise DegenerateSample(str(e)) from e


def reprojection_errors(h: Homography, src, dst):
    X, Y = h.map(src[:, 0], src[:, 1], strict=False)
    err = np.hypot(X - dst[:, 0], Y - dst[:, 1])
    return np.where(np.isfinite(err), err, np.inf)


@dataclass
class RansacConfig:
    threshold: float = 3.0
    max_iters: int = 2000
    confidence: float = 0.995
    seed: int = 0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


def _required_iters(inlier_ratio, confidence, cap):
    if inlier_ratio >= 1.0:
        return 1
    good = inlier_ratio**4
    if good <= 0:
        return cap
    return min(cap, int(math.ceil(math.log(1 - confidence) / math.log(1 - good))))


def _rmse(err, mask):
    return float(np.sqrt(np.mean(err[mask] ** 2))) if mask.any() else np.inf


def estimate_homography_ransac(m: MatchSet, cfg: Optional[RansacConfig] = None):
    """Seeded RANSAC; returns ``(H, inlier_mask)`` and writes the mask into ``m``.

    Best hypothesis = most inliers, then lower inlier RMSE, then earliest
    iteration. The winner is refit on all of its inliers.
    """
    cfg = cfg or RansacConfig()
    n = len(m)
    if n < 4:
        raise NoConsensus(f"{n} matches cannot determine a homography")
    src, dst = m.target, m.reference
    rng = np.random.default_rng(cfg.seed)
    best = None  # (count, rmse, mask)
    needed = cfg.max_iters
    it = 0
    while it < min(needed, cfg.max_iters):
        it += 1
        sample = rng.choice(n, 4, replace=False)
        try:
            h = dlt_homography(src[sample], dst[sample])
        except DegenerateSample:
            continue
        err = reprojection_errors(h, src, dst)
        mask = err < cfg.threshold
        count = int(mask.sum())
        if count < 4:
            continue
        rmse = _rmse(err, mask)
        if best is None or count > best[0] or (count == best[0] and rmse < best[1]):
            best = (count, rmse, mask)
            needed = _required_iters(count / n, cfg.confidence, cfg.max_iters)
    if best is None:
        raise NoConsensus("no hypothesis gathered four inliers")

    mask = best[2]
    h = dlt_homography(src[mask], dst[mask])
    for _ in range(5):
        err = reprojection_errors(h, src, dst)
        new = err < cfg.threshold
        if new.sum() < 4 or np.array_equal(new, mask):
            break
        mask = new
        h = dlt_homography(src[mask], dst[mask])
    m.inlier = mask.copy()
    return h, mask


def fit_similarity(src, dst) -> Similarity:
    """Closed-form least-squares similarity with ``dst ~ S src``."""
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    if len(src) < 2:
        raise DegenerateConfiguration("need at least two correspondences")
    cs, cd = src.mean(0), dst.mean(0)
    p, q = src - cs, dst - cd
    den = (p**2).sum()
    if den <= 1e-12 * max(1.0, (cs**2).sum()):
        raise DegenerateConfiguration("all source points coincide")
    a = (p[:, 0] * q[:, 0] + p[:, 1] * q[:, 1]).sum() / den
    b = (p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]).sum() / den
    tx = cd[0] - (a * cs[0] - b * cs[1])
    ty = cd[1] - (b * cs[0] + a * cs[1])
    return Similarity(float(a), float(b), float(tx), float(ty))


def selection_scale(s: Similarity) -> float:
    if s.a == 0 and s.b == 0:
        raise DegenerateConfiguration("similarity has zero scale")
    return s.scale


def alignment_rmse(h: Homography, src, dst):
    err = reprojection_errors(h, np.asarray(src, float), np.asarray(dst, float))
    return float(np.sqrt(np.mean(err**2))) if len(err) else 0.0

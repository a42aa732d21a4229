"""Warps and sampling: homography, similarity, cylindrical and half-cylindrical.

Coordinates follow the image convention: origin at the upper-left, x to the
right, y down, and pixel centers at integer coordinates starting at 1. Array
element ``samples[r, c]`` therefore sits at ``(x, y) = (c + 1, r + 1)``.

Scalar helpers (``apply_homography``, ``cyl_forward`` ...) take and return
:class:`Point2`; the class methods work on numpy arrays of any shape.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateDepth, OutOfRange, SingularMatrix

DEPTH_EPS = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


def _canonical(m):
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("homography has non-finite entries")
    k = np.argmax(np.abs(m))
    big = m.flat[k]
    if big == 0:
        raise SingularMatrix("zero matrix")
    return m / big


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective map, stored with its largest-magnitude entry equal to +1."""

    m: np.ndarray

    def __post_init__(self):
        m = _canonical(self.m)
        row_norms = np.linalg.norm(m, axis=1)
        if abs(np.linalg.det(m)) < 1e-12 * np.prod(row_norms):
            raise SingularMatrix("homography determinant is zero relative to its scale")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx, ty):
        return cls(np.array([[1.0, 0, tx], [0, 1.0, ty], [0, 0, 1.0]]))

    def depth(self, x, y):
        m = self.m
        return m[2, 0] * x + m[2, 1] * y + m[2, 2]

    def map(self, x, y, strict=True):
        """Map arrays of points. With ``strict=False`` degenerate points become NaN."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        m = self.m
        w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
        bad = np.abs(w) <= DEPTH_EPS
        if np.any(bad):
            if strict:
                raise DegenerateDepth("point lies on the horizon line of the homography")
            w = np.where(bad, np.nan, w)
        X = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w
        Y = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w
        return X, Y

    def inverse(self):
        m = self.m
        if abs(np.linalg.det(m)) < 1e-12 * np.prod(np.linalg.norm(m, axis=1)):
            raise SingularMatrix("cannot invert singular homography")
        return Homography(np.linalg.inv(m))

    def __matmul__(self, other):
        """Composition: ``(a @ b)`` applies ``b`` first."""
        return Homography(self.m @ other.m)

    def distance(self, other):
        """Relative Frobenius distance between canonical forms."""
        return float(np.linalg.norm(self.m - other.m) / np.linalg.norm(other.m))


def apply_homography(h: Homography, p: Point2) -> Point2:
    X, Y = h.map(p[0], p[1])
    return Point2(float(X), float(Y))


def invert_homography(h: Homography) -> Homography:
    return h.inverse()


@dataclass(frozen=True)
class Similarity:
    """``x' = a x - b y + tx``, ``y' = b x + a y + ty``."""

    a: float
    b: float
    tx: float
    ty: float

    @property
    def scale(self):
        return float(np.hypot(self.a, self.b))

    def matrix(self):
        return np.array([[self.a, -self.b, self.tx], [self.b, self.a, self.ty], [0, 0, 1.0]])

    def map(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.a * x - self.b * y + self.tx, self.b * x + self.a * y + self.ty


@dataclass(frozen=True)
class CylindricalParams:
    f: float
    a0: float
    b0: float

    def __post_init__(self):
        if not (np.isfinite(self.f) and self.f > 0):
            raise ValueError(f"focal length must be finite and positive, got {self.f}")
        if not (np.isfinite(self.a0) and np.isfinite(self.b0)):
            raise ValueError("cylinder center must be finite")

    def forward(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        f, a0, b0 = self.f, self.a0, self.b0
        dx = x - a0
        r = np.sqrt(dx * dx + f * f)
        # written as corrections to (a0, y) so the line x = a0 maps to itself bit-exactly
        xo = a0 + f * np.arctan(dx / f)
        yo = y - (y - b0) * (1.0 - f / r)
        return xo, yo

    def inverse(self, x, y, strict=True):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        f, a0, b0 = self.f, self.a0, self.b0
        u = (x - a0) / f
        bad = np.abs(u) >= np.pi / 2
        if np.any(bad):
            if strict:
                raise OutOfRange(f"|x - a0| must be below f*pi/2 = {f * np.pi / 2:.6g}")
            u = np.where(bad, np.nan, u)
        dx = f * np.tan(u)
        r = np.sqrt(dx * dx + f * f)
        return a0 + dx, y + (y - b0) * (r / f - 1.0)


def cyl_forward(c: CylindricalParams, p: Point2) -> Point2:
    X, Y = c.forward(p[0], p[1])
    return Point2(float(X), float(Y))


def cyl_inverse(c: CylindricalParams, q: Point2) -> Point2:
    X, Y = c.inverse(q[0], q[1])
    return Point2(float(X), float(Y))


class Side(enum.Enum):
    """Which side of the partition line x = a0 the cylindrical branch covers."""

    CYL_LEFT_OF_LINE = "left"
    CYL_RIGHT_OF_LINE = "right"

    @property
    def sign(self):
        return 1 if self is Side.CYL_RIGHT_OF_LINE else -1


@dataclass(frozen=True)
class HalfCylWarp:
    """Homography on one side of x = a0, cylinder after homography on the other.

    ``c`` may be None, in which case the cylindrical branch is the identity
    (the fallback used when no bending is needed); ``a0`` then still defines
    the partition line.
    """

    h: Homography
    c: Optional[CylindricalParams]
    side: Side
    a0: Optional[float] = None

    def __post_init__(self):
        if self.a0 is None:
            if self.c is None:
                raise ValueError("a0 is required when no cylinder is given")
            object.__setattr__(self, "a0", float(self.c.a0))
        elif self.c is not None and self.a0 != self.c.a0:
            raise ValueError("a0 disagrees with the cylinder center")

    def in_cyl_region(self, x):
        """Membership of post-homography abscissas in R_C (the line itself is R_H)."""
        x = np.asarray(x, dtype=float)
        if self.side is Side.CYL_RIGHT_OF_LINE:
            return x > self.a0
        return x < self.a0

    def forward(self, x, y, strict=True):
        X, Y = self.h.map(x, y, strict=strict)
        if self.c is None:
            return X, Y
        cyl = self.in_cyl_region(X)
        CX, CY = self.c.forward(X, Y)
        return np.where(cyl, CX, X), np.where(cyl, CY, Y)

    def inverse(self, x, y, strict=True):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.c is not None:
            cyl = self.in_cyl_region(x)
            if strict and np.any(cyl):
                self.c.inverse(x[cyl], y[cyl])  # raises OutOfRange
            with np.errstate(invalid="ignore"):
                CX, CY = self.c.inverse(x, y, strict=False)
            x = np.where(cyl, CX, x)
            y = np.where(cyl, CY, y)
        return self.h.inverse().map(x, y, strict=strict)


def half_cyl_forward(t: HalfCylWarp, p: Point2) -> Point2:
    X, Y = t.forward(p[0], p[1])
    return Point2(float(X), float(Y))


def half_cyl_inverse(t: HalfCylWarp, q: Point2) -> Point2:
    X, Y = t.inverse(q[0], q[1])
    return Point2(float(X), float(Y))


@dataclass(eq=False)
class ImageGrid:
    """Raster image: ``samples`` is (height, width, channels) in [0, 1]."""

    samples: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 2:
            s = s[:, :, None]
        if s.ndim != 3 or s.shape[2] not in (1, 3, 4):
            raise ValueError(f"samples must be (h, w, c) with c in 1, 3, 4; got {s.shape}")
        if s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError("image must be non-empty")
        v = np.asarray(self.valid, dtype=bool)
        if v.shape != s.shape[:2]:
            raise ValueError("valid mask shape does not match samples")
        if not v.any():
            if s.any():
                s = np.zeros_like(s)
        elif not v.all():
            s = np.where(v[:, :, None], s, 0.0)
        self.samples = s
        self.valid = v

    @classmethod
    def from_array(cls, arr, valid=None):
        arr = np.asarray(arr, dtype=float)
        if valid is None:
            valid = np.ones(arr.shape[:2], dtype=bool)
        return cls(arr, valid)

    @classmethod
    def blank(cls, height, width, channels):
        return cls(np.zeros((height, width, channels)), np.zeros((height, width), dtype=bool))

    @property
    def height(self):
        return self.samples.shape[0]

    @property
    def width(self):
        return self.samples.shape[1]

    @property
    def channels(self):
        return self.samples.shape[2]

    @property
    def dims(self):
        """(width, height)."""
        return self.width, self.height

    def gray(self):
        return self.samples[:, :, :3].mean(axis=2) if self.channels >= 3 else self.samples[:, :, 0]


def sample_bilinear(img: ImageGrid, x, y):
    """Vectorized bilinear lookup at 1-based coordinates.

    Returns ``(values, ok)`` with values of shape ``x.shape + (channels,)``;
    entries where ``ok`` is False are zero. A sample fails when a support
    pixel with nonzero weight lies outside the image or is invalid.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = x.shape
    w, h, c = img.width, img.height, img.channels
    x = x.ravel() - 1.0
    y = y.ravel() - 1.0
    eps = 1e-9  # round-off allowance so integer lookups (e.g. integer shifts) stay exact
    with np.errstate(invalid="ignore"):
        inside = (x >= -eps) & (x <= w - 1 + eps) & (y >= -eps) & (y <= h - 1 + eps)
    everywhere = bool(inside.all())
    if not everywhere:
        sel = np.flatnonzero(inside)
        x, y = x[sel], y[sel]
    x0 = np.minimum((x + eps).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum((y + eps).astype(np.intp), max(h - 2, 0))
    fx = x - x0
    fy = y - y0
    fx[fx < eps] = 0.0
    fy[fy < eps] = 0.0
    dx = 1 if w > 1 else 0
    dy = w if h > 1 else 0
    i00 = y0 * w
    i00 += x0

    s = img.samples.reshape(-1, c)
    # lerp form keeps constant spans exact (a + f * 0 == a)
    fxc = fx[:, None]
    top = np.take(s, i00, axis=0)
    tmp = np.take(s, i00 + dx, axis=0)
    tmp -= top
    tmp *= fxc
    top += tmp
    bot = np.take(s, i00 + dy, axis=0)
    np.take(s, i00 + (dx + dy), axis=0, out=tmp)
    tmp -= bot
    tmp *= fxc
    bot += tmp
    bot -= top
    bot *= fy[:, None]
    vals = top
    vals += bot
    if img.valid.all():
        ok = np.ones(len(x), dtype=bool)
    else:
        v = img.valid.ravel()
        ok = np.ones(len(x), dtype=bool)
        gx, gy = 1.0 - fx, 1.0 - fy
        corners = ((i00, gx * gy), (i00 + dx, fx * gy), (i00 + dy, gx * fy), (i00 + (dx + dy), fx * fy))
        for idx, wt in corners:
            ok &= np.take(v, idx) | (wt == 0)
        vals[~ok] = 0.0

    if everywhere:
        return vals.reshape(shape + (c,)), ok.reshape(shape)
    out = np.zeros((inside.size, c))
    out[sel] = vals
    good = np.zeros(inside.size, dtype=bool)
    good[sel] = ok
    return out.reshape(shape + (c,)), good.reshape(shape)


def bilinear_sample(img: ImageGrid, p: Point2):
    """Color at ``p`` as a 1-D array, or None when the support is missing."""
    vals, ok = sample_bilinear(img, np.array([p[0]]), np.array([p[1]]))
    if not ok[0]:
        return None
    return vals[0]

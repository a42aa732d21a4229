import numpy as np
import pytest

from halfcyl.geometry import Homography
from halfcyl.pipeline import synthetic_pair


def random_homography(rng, persp=2e-4, width=640, height=480):
    """Well-conditioned homography: near-identity linear part, mild perspective."""
    m = np.eye(3)
    m[:2, :2] += rng.uniform(-0.1, 0.1, (2, 2))
    m[0, 2], m[1, 2] = rng.uniform(-0.3, 0.3) * width, rng.uniform(-0.1, 0.1) * height
    m[2, :2] = rng.uniform(-persp, persp, 2)
    return Homography(m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_pair():
    return synthetic_pair(360, 480, overlap=0.3, perspective=-3e-4, seed=7)


def stripe_residual(W=400, H=300, stripe_x=60.0, half_width=2.5):
    """Render a dark vertical stripe that lands in the homography half and
    return the max distance of its per-row centroids from a fitted line."""
    from halfcyl.compositor import canvas_bounds, render_target
    from halfcyl.geometry import CylindricalParams, HalfCylWarp, ImageGrid, Side
    from halfcyl.resample import build_sample_grid, filter_nonoverlap, resample_strip

    xx = np.arange(1, W + 1, dtype=float)
    # anti-aliased box profile so the centroid is sub-pixel exact before warping
    dark = np.clip(half_width + 0.5 - np.abs(xx - stripe_x), 0, 1)
    tgt = ImageGrid.from_array(np.tile(1.0 - dark, (H, 1)))
    h = Homography(np.array([[0.9, 0.02, 250], [-0.01, 0.95, 10], [-2e-4, 5e-5, 1]]))
    t = HalfCylWarp(h, CylindricalParams(600.0, float(W), H / 2), Side.CYL_RIGHT_OF_LINE)
    strip = resample_strip(tgt, t, filter_nonoverlap(build_sample_grid((W, H), 0.9), t))
    canvas = canvas_bounds((W, H), t, (W, H), strip)
    out = render_target(tgt, t, strip, canvas)

    ys, xs = [], []
    ex, ey = h.map(np.array([stripe_x, stripe_x]), np.array([1.0, float(H)]))
    top, bot = (ex[0], ey[0]), (ex[1], ey[1])
    for r in range(canvas.height):
        Y = canvas.y0 + r
        if not (top[1] + 3 <= Y <= bot[1] - 3):
            continue
        guess = top[0] + (Y - top[1]) / (bot[1] - top[1]) * (bot[0] - top[0])
        c = int(round(guess)) - canvas.x0
        win = slice(c - 8, c + 9)
        if not out.valid[r, win].all():
            continue
        wgt = 1.0 - out.samples[r, win, 0]
        cols = canvas.x0 + np.arange(c - 8, c + 9)
        xs.append(np.dot(wgt, cols) / wgt.sum())
        ys.append(Y)
    ys, xs = np.array(ys), np.array(xs)
    fit = np.polyfit(ys, xs, 1)
    return float(np.max(np.abs(np.polyval(fit, ys) - xs)))

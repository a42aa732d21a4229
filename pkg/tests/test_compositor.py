import time

import numpy as np
import pytest

from halfcyl.compositor import (
    Canvas,
    Label,
    SeamLabels,
    blend,
    canvas_bounds,
    downscale,
    dp_seam,
    find_seam,
    render_target,
    upscale_labels,
)
from halfcyl.errors import NoOverlap
from halfcyl.geometry import CylindricalParams, HalfCylWarp, Homography, ImageGrid, Side
from halfcyl.resample import build_sample_grid, filter_nonoverlap, resample_strip

from conftest import stripe_residual

W, H = 160, 120


def _flat(h, a0=float(W)):
    return HalfCylWarp(h, None, Side.CYL_RIGHT_OF_LINE, a0=a0)


def test_canvas_identity():
    assert canvas_bounds((W, H), _flat(Homography.identity()), (W, H)) == Canvas(1, 1, W, H)


def test_canvas_with_strip():
    t = _flat(Homography.translation(W, 0))
    tgt = ImageGrid.blank(H, W, 1)
    tgt.valid[:] = True
    strip = resample_strip(tgt, t, filter_nonoverlap(build_sample_grid((W, H), 0.8), t))
    c = canvas_bounds((W, H), t, (W, H), strip)
    assert abs(c.width - (W + int(np.floor(0.8 * W)))) <= 1
    assert c.height == H and (c.x0, c.y0) == (1, 1)


def test_canvas_contains_render(rng):
    tgt = ImageGrid.from_array(rng.random((H, W)))
    h = Homography(np.array([[0.9, 0.03, 90], [-0.02, 0.95, 12], [-3e-4, 1e-4, 1]]))
    t = HalfCylWarp(h, CylindricalParams(300, float(W), 60), Side.CYL_RIGHT_OF_LINE)
    strip = resample_strip(tgt, t, filter_nonoverlap(build_sample_grid((W, H), 0.9), t))
    c = canvas_bounds((W, H), t, (W, H), strip)
    big = Canvas(c.x0 - 20, c.y0 - 20, c.width + 40, c.height + 40)
    out = render_target(tgt, t, strip, big)
    rr, cc = np.nonzero(out.valid)
    X, Y = big.x0 + cc, big.y0 + rr
    x_min, y_min, x_max, y_max = c.bounds
    assert X.min() >= x_min and X.max() <= x_max
    assert Y.min() >= y_min and Y.max() <= y_max


def test_render_identity_pastes_target(rng):
    tgt = ImageGrid.from_array(rng.random((H, W, 3)))
    t = _flat(Homography.identity())
    out = render_target(tgt, t, None, canvas_bounds((W, H), t, (W, H)))
    assert out.valid.all()
    assert np.array_equal(out.samples, tgt.samples)


def test_render_checkerboard_integer_shift():
    r, c = np.mgrid[0:H, 0:W]
    board = ((r // 8 + c // 8) % 2).astype(float)
    tgt = ImageGrid.from_array(board)
    t = _flat(Homography.translation(7, -3))
    canvas = Canvas(1, 1, W + 20, H + 20)
    out = render_target(tgt, t, None, canvas)
    # target pixel (x, y) lands at (x + 7, y - 3); canvas column = x + 6
    got = out.samples[0 : H - 3, 7 : W + 7, 0]
    assert np.array_equal(got, board[3:, :])
    assert out.valid[0 : H - 3, 7 : W + 7].all()
    assert not out.valid[H - 3 :].any()


def test_vertical_stripe_stays_straight():
    assert stripe_residual(W=400, H=300) < 0.5


# ------------------------------------------------------------------ downscale


def test_downscale_factor_one(rng):
    img = ImageGrid.from_array(rng.random((9, 7, 3)))
    out = downscale(img, 1)
    assert np.array_equal(out.samples, img.samples) and out.valid.all()


def test_downscale_constant_blocks():
    blocks = np.array([[0.1, 0.7], [0.3, 0.9]])
    img = ImageGrid.from_array(np.kron(blocks, np.ones((2, 2))))
    assert np.array_equal(downscale(img, 2).samples[..., 0], blocks)


def test_downscale_ramp_factor_8():
    h, w = 37, 45
    r, c = np.mgrid[0:h, 0:w].astype(float)
    img = ImageGrid.from_array(c + 1000 * r)
    out = downscale(img, 8)
    assert out.samples.shape[:2] == (5, 6)
    for i in range(5):
        for j in range(6):
            rows = np.arange(8 * i, min(8 * i + 8, h))
            cols = np.arange(8 * j, min(8 * j + 8, w))
            want = cols.mean() + 1000 * rows.mean()
            assert out.samples[i, j, 0] == pytest.approx(want, abs=1e-9)


def test_downscale_validity():
    img = ImageGrid.from_array(np.ones((16, 16)))
    img.valid[3, 12] = False
    out = downscale(img, 8)
    assert out.valid.tolist() == [[True, False], [True, True]]


# ------------------------------------------------------------------ seam


def enumerate_paths(h, w):
    """Every 8-connected top-to-bottom column sequence, as an (n, h) array."""
    paths = np.arange(w)[:, None]
    for _ in range(h - 1):
        step = np.repeat(paths, 3, axis=0)
        nxt = step[:, -1] + np.tile([-1, 0, 1], len(paths))
        ok = (nxt >= 0) & (nxt < w)
        paths = np.column_stack([step[ok], nxt[ok]])
    return paths


def brute_force(energy, paths):
    h = energy.shape[0]
    costs = energy[np.arange(h), paths].sum(axis=1)
    return costs.min(), paths[np.flatnonzero(costs == costs.min())]


def test_seam_zero_energy_leftmost():
    path, cost = dp_seam(np.zeros((6, 5)))
    assert cost == 0 and path.tolist() == [0] * 6
    img = ImageGrid.from_array(np.full((6, 5), 0.3))
    labels = find_seam(img, img, np.ones((6, 5), bool))
    assert labels.cut.tolist() == [0] * 6


def test_seam_single_row(rng):
    e = rng.random((1, 17))
    path, cost = dp_seam(e)
    assert path[0] == min(range(17), key=lambda j: e[0, j])
    assert cost == e.min()


def test_seam_follows_corridor(rng):
    corridor = [4, 5, 5, 6, 5, 4, 3, 3, 4, 4]
    e = 1 + rng.random((10, 10))
    e[np.arange(10), corridor] = 0
    path, cost = dp_seam(e)
    best, ties = brute_force(e, enumerate_paths(10, 10))
    assert best == 0 and len(ties) == 1
    assert path.tolist() == corridor == ties[0].tolist()


def test_seam_matches_enumeration_with_ties(rng):
    paths = enumerate_paths(7, 6)
    for _ in range(20):
        e = rng.integers(0, 3, (7, 6)).astype(float)
        path, cost = dp_seam(e)
        best, ties = brute_force(e, paths)
        assert cost == best
        # ties break to the lexicographically smallest sequence read top-down
        assert tuple(path.tolist()) == min(map(tuple, ties.tolist()))


def test_find_seam_no_overlap():
    img = ImageGrid.from_array(np.zeros((4, 4)))
    with pytest.raises(NoOverlap):
        find_seam(img, img, np.zeros((4, 4), bool))


def test_labels_single_transition(rng):
    a = ImageGrid.from_array(rng.random((40, 50, 3)))
    b = ImageGrid.from_array(rng.random((40, 50, 3)))
    overlap = np.zeros((40, 50), bool)
    overlap[5:35, 10:40] = True
    lab = find_seam(a, b, overlap)
    assert np.all(lab.transitions() <= 1)
    assert np.all((lab.cut >= 10) & (lab.cut < 40))
    assert set(np.unique(lab.label)) <= {0, 1}


# ------------------------------------------------------------------ upscale


def test_upscale_identity():
    lab = SeamLabels(np.array([3, 4, 4, 2]), 9)
    up = upscale_labels(lab, 1)
    assert np.array_equal(up.cut, lab.cut) and up.width == 9


def test_upscale_block_range():
    lab = SeamLabels(np.array([5, 6]), 10)
    up = upscale_labels(lab, 4)
    for r in range(8):
        c = lab.cut[r // 4]
        t = int(np.argmax(up.label[r] != up.label[r, 0]))
        assert 4 * c <= t < 4 * (c + 1)


def test_upscale_random_monotone(rng):
    for _ in range(20):
        steps = rng.integers(-1, 2, 30)
        cut = np.clip(15 + np.cumsum(steps), 1, 39)
        up = upscale_labels(SeamLabels(cut, 40), 8)
        assert np.all(up.transitions() == 1)


# ------------------------------------------------------------------ blend


def _pair(rng):
    a = ImageGrid.from_array(rng.random((20, 30, 3)))
    b = ImageGrid.from_array(rng.random((20, 30, 3)))
    a.valid[:, 22:] = False
    b.valid[:, :8] = False
    a.samples[~a.valid] = 0
    b.samples[~b.valid] = 0
    return a, b


def test_blend_all_reference(rng):
    a, b = _pair(rng)
    out = blend(a, b, SeamLabels(np.full(20, 30), 30))
    both = a.valid & b.valid
    assert np.array_equal(out.samples[both], a.samples[both])
    assert np.array_equal(out.samples[~a.valid & b.valid], b.samples[~a.valid & b.valid])


def test_blend_conserves_values(rng):
    a, b = _pair(rng)
    lab = find_seam(a, b, a.valid & b.valid)
    out = blend(a, b, lab)
    from_a = np.all(out.samples == a.samples, axis=2) & a.valid
    from_b = np.all(out.samples == b.samples, axis=2) & b.valid
    assert np.all(from_a | from_b)
    assert out.valid.all()


def test_blend_feather_stays_between(rng):
    a, b = _pair(rng)
    lab = SeamLabels(np.full(20, 15), 30)
    out = blend(a, b, lab, feather=3)
    lo = np.minimum(a.samples, b.samples)
    hi = np.maximum(a.samples, b.samples)
    both = a.valid & b.valid
    assert np.all(out.samples[both] >= lo[both] - 1e-12)
    assert np.all(out.samples[both] <= hi[both] + 1e-12)


def test_seam_speedup_factor_8(rng):
    # times the seam search itself; the box downscale is a separate linear pass
    a = ImageGrid.from_array(rng.random((1500, 2000, 3)))
    b = ImageGrid.from_array(rng.random((1500, 2000, 3)))
    sa, sb = downscale(a, 8), downscale(b, 8)
    overlap, small = np.ones((1500, 2000), bool), sa.valid & sb.valid

    def best(fn):
        ts = []
        for _ in range(3):
            t0 = time.perf_counter()
            fn()
            ts.append(time.perf_counter() - t0)
        return min(ts)

    full = best(lambda: find_seam(a, b, overlap))
    reduced = best(lambda: find_seam(sa, sb, small))
    assert full >= 10 * reduced

"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are printed
even when output capture is on.
"""
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from halfcyl.compositor import dp_seam
from halfcyl.geometry import CylindricalParams, HalfCylWarp, Homography, Point2, Side, cyl_forward
from halfcyl.params import ColumnHeights, FocalSearchConfig, estimate_b0, estimate_focal, focal_objective
from halfcyl.pipeline import (
    StitchConfig,
    height_profile,
    make_synthetic_pair,
    run_stitch,
    save_image,
    stitch_images,
    synthetic_pair,
    synthetic_stats,
    synthetic_texture,
    timing_report,
)
from halfcyl.registration import alignment_rmse

from conftest import random_homography, stripe_residual


@pytest.fixture
def verdict(capsys):
    def report(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail

    return report


@pytest.fixture(scope="module")
def pair():
    return synthetic_pair(480, 640, overlap=0.3, perspective=-3e-4, seed=0)


@pytest.fixture(scope="module")
def result(pair):
    return stitch_images(pair.ref, pair.tgt)


def test_fixed_line_continuity(verdict):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    f = rng.uniform(1, 1e5, 10_000)
    a0 = rng.uniform(-5000, 5000, 10_000)
    b0 = rng.uniform(-5000, 5000, 10_000)
    y = rng.uniform(-5000, 5000, 10_000)
    exact = all(cyl_forward(CylindricalParams(*p), Point2(p[1], yy)) == (p[1], yy) for p, yy in zip(zip(f, a0, b0), y))
    # both branches on the partition line: homography alone vs cylinder after homography
    gap = 0.0
    for _ in range(20):
        h = random_homography(rng)
        c = CylindricalParams(rng.uniform(200, 5000), rng.uniform(0, 640), rng.uniform(0, 480))
        t = HalfCylWarp(h, c, Side.CYL_RIGHT_OF_LINE)
        ys = rng.uniform(-500, 1000, 500)
        px, py = h.inverse().map(np.full(500, c.a0), ys)
        hx, hy = t.forward(px, py)
        qx, qy = h.map(px, py)
        cx, cy = c.forward(qx, qy)
        gap = max(gap, float(np.max(np.hypot(hx - cx, hy - cy))))
    elapsed = time.perf_counter() - t0
    ok = exact and gap < 1e-12 and elapsed < 1.0
    verdict("fixed line / continuity", ok, f"exact={exact}, branch gap={gap:.2e} px, runtime={elapsed:.3f} s")


def test_inverse_roundtrips(verdict):
    rng = np.random.default_rng(2)
    n = 10_000
    h = random_homography(rng)
    p = rng.uniform(0, 640, (n, 2))
    X, Y = h.map(p[:, 0], p[:, 1])
    bx, by = h.inverse().map(X, Y)
    e_h = np.max(np.hypot(bx - p[:, 0], by - p[:, 1]))

    e_c = 0.0
    for _ in range(100):
        c = CylindricalParams(rng.uniform(100, 5000), rng.uniform(0, 2000), rng.uniform(0, 2000))
        x = c.a0 + rng.uniform(-3, 3, n // 100) * c.f
        y = rng.uniform(-1000, 3000, n // 100)
        cx, cy = c.forward(x, y)
        bx, by = c.inverse(cx, cy)
        e_c = max(e_c, np.max(np.hypot(bx - x, by - y)))

    t = HalfCylWarp(h, CylindricalParams(900.0, float(np.median(X)), 240.0), Side.CYL_RIGHT_OF_LINE)
    tx, ty = t.forward(p[:, 0], p[:, 1])
    bx, by = t.inverse(tx, ty)
    e_t = np.max(np.hypot(bx - p[:, 0], by - p[:, 1]))
    ok = max(e_h, e_c, e_t) < 1e-9
    verdict("inverse round-trips", ok, f"homography {e_h:.1e}, cylindrical {e_c:.1e}, half-cylindrical {e_t:.1e} px")


def test_ratio_preservation(verdict):
    w, h = 640, 480
    src = synthetic_texture(int(h / 0.8) + 40, int(w * 1.6 / 0.8) + 40, seed=5)
    cx, cy = (w + 1) / 2, (h + 1) / 2
    scale = Homography(np.array([[0.8, 0, cx * 0.2], [0, 0.8, cy * 0.2], [0, 0, 1.0]]))
    p = make_synthetic_pair(src, scale, 0.4, window=(h, w))
    res = stitch_images(p.ref, p.tgt)
    a0 = res.report.a0
    worst = 0.0
    for row in range(1, h + 1, 7):
        x_line = brentq(lambda x: p.h_true.map(x, float(row))[0] - a0, -10 * w, w)
        want = math.floor(0.8 * (w - x_line))
        worst = max(worst, abs(int(res.strip.row_widths[row - 1]) - want))
    spacing = np.diff(res.strip.canvas_columns())
    ok = worst <= 2 and np.all(spacing == 1)
    verdict("ratio preservation (s = 0.8)", ok, f"estimated s={res.report.scale:.4f}, max |width - floor(0.8 w_visible)|={worst} px, unit spacing={bool(np.all(spacing == 1))}")


def test_height_preservation(verdict, result):
    h2 = height_profile(result)
    rel = abs(h2.mean() - result.h_target) / result.h_target
    d = np.linspace(0, 1000, 400)
    hD = 500.0
    ch = ColumnHeights(100.0 + d, (hD - 1) * np.sqrt(d**2 + 800.0**2) / 800.0 + 1, 100.0)
    f, _ = estimate_focal(ch, 100.0, hD, FocalSearchConfig(100.0, 20000.0))
    resid = focal_objective(f, ch, hD)
    ok = rel <= 0.05 and not result.report.degenerate_focal and abs(f - 800) <= 0.5 and resid < 1e-6
    verdict("height preservation", ok, f"mean h''={h2.mean():.2f} vs hD={result.h_target:.2f} ({100 * rel:.2f}%), f={result.report.focal:.1f}; constructed f={f:.4f}, residual={resid:.1e}")


def test_b0_correctness(verdict):
    rng = np.random.default_rng(3)
    dims = (640, 480)
    mismatches = 0
    for _ in range(20):
        h = random_homography(rng, persp=3e-4)
        best, b = np.inf, None
        for i in range(1, dims[1] + 1):
            yl = h.map(1.0, float(i))[1]
            yr = h.map(float(dims[0]), float(i))[1]
            if abs(yl - yr) < best:
                best, b = abs(yl - yr), (yl + yr) / 2
        mismatches += estimate_b0(h, dims) != b
    verdict("b0 equals exhaustive row scan", mismatches == 0, f"{20 - mismatches}/20 homographies agree")


def test_registration_accuracy(verdict, pair, result):
    src, dst = result.matches.inliers()
    rmse = alignment_rmse(result.homography, src, dst)
    truth_rmse = synthetic_stats(pair, result.homography)
    dist = result.homography.distance(pair.h_true)
    ok = rmse < 0.5 and dist < 1e-3
    verdict("registration accuracy", ok, f"inlier RMSE={rmse:.3f} px, ground-truth RMSE={truth_rmse:.3f} px, relative H distance={dist:.2e}")


def _all_paths(h, w):
    paths = np.arange(w, dtype=np.int16)[:, None]
    for _ in range(h - 1):
        step = np.repeat(paths, 3, axis=0)
        nxt = step[:, -1] + np.tile(np.array([-1, 0, 1], dtype=np.int16), len(paths))
        ok = (nxt >= 0) & (nxt < w)
        paths = np.column_stack([step[ok], nxt[ok]])
    return paths


def test_seam_optimality(verdict):
    rng = np.random.default_rng(4)
    paths = _all_paths(12, 12)
    flat = (np.arange(12, dtype=np.int16) * 12)[None, :] + paths
    worst = 0.0
    for _ in range(100):
        e = rng.random((12, 12))
        _, cost = dp_seam(e)
        brute = e.ravel()[flat].sum(axis=1).min()
        worst = max(worst, abs(cost - brute))
    verdict("seam DP equals brute force", worst < 1e-9, f"{len(paths)} monotone paths per 12x12 grid, max |DP - brute|={worst:.1e}")


def test_table_speedup(verdict):
    (row,) = timing_report([(1500, 2000)], StitchConfig(seam_scale=8), runs=3)
    ratio = row["total_time_resized_s"] / row["total_time_original_s"]
    ok = ratio <= 0.1 and row["warp_time_s"] < 1.0
    verdict(
        "seam-resize speedup at 1500x2000",
        ok,
        f"total {row['total_time_original_s']:.2f} s (seam scale 1) vs {row['total_time_resized_s']:.2f} s (scale 8), ratio={ratio:.3f} (need <= 0.1); "
        f"seam {row['seam_time_original_s']:.3f} s vs {row['seam_time_resized_s']:.3f} s; warp={row['warp_time_s']:.3f} s (need < 1)",
    )


def test_straight_stripe(verdict):
    r = stripe_residual()
    verdict("straight stripe stays straight", r < 0.5, f"line-fit residual={r:.3f} px")


def test_determinism(verdict, pair, tmp_path):
    save_image(pair.ref, tmp_path / "ref.png")
    save_image(pair.tgt, tmp_path / "tgt.png")
    outs = []
    for k in range(2):
        out, met = tmp_path / f"out{k}.png", tmp_path / f"m{k}.json"
        run_stitch(tmp_path / "ref.png", tmp_path / "tgt.png", out, StitchConfig(seed=7), met)
        outs.append((out.read_bytes(), met.read_bytes()))
    png = outs[0][0] == outs[1][0]
    js = outs[0][1] == outs[1][1]
    verdict("determinism", png and js, f"PNG identical={png}, metrics JSON identical={js}")

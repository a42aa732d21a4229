"""Sample grid, non-overlap filter and the resampled strip at s = 0.8."""
import numpy as np

from halfcyl.geometry import CylindricalParams, HalfCylWarp, Homography, ImageGrid, Side
from halfcyl.resample import build_sample_grid, filter_nonoverlap, resample_strip

w, h = 640, 480
yy, xx = np.mgrid[1 : h + 1, 1 : w + 1]
tgt = ImageGrid.from_array(((xx // 40 + yy // 40) % 2).astype(float))

H = Homography(np.array([[0.8, 0.02, 350.0], [-0.01, 0.8, 40.0], [-1.5e-4, 0.0, 1.0]]))
t = HalfCylWarp(H, CylindricalParams(1100.0, 640.0, 220.0), Side.CYL_RIGHT_OF_LINE)

g = build_sample_grid((w, h), 0.8)
print(g.n, "samples per row, spacing", g.xs[1] - g.xs[0])
g = filter_nonoverlap(g, t)
print("retained per row: min", g.keep.sum(1).min(), "max", g.keep.sum(1).max())

strip = resample_strip(tgt, t, g)
print("strip", strip.image.samples.shape[:2], "anchored at", strip.anchor)
print("placed columns are one pixel apart:", bool(np.all(np.diff(strip.canvas_columns()) == 1)))

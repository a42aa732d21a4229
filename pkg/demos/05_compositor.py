"""Seam search on a reduced grid, label upscale and blend."""
import time

import numpy as np

from halfcyl.compositor import blend, downscale, find_seam, upscale_labels
from halfcyl.geometry import ImageGrid

rng = np.random.default_rng(0)
a = ImageGrid.from_array(rng.random((600, 800, 3)))
b = ImageGrid.from_array(rng.random((600, 800, 3)))
a.valid[:, 600:] = False
b.valid[:, :200] = False
overlap = a.valid & b.valid

t0 = time.perf_counter()
full = find_seam(a, b, overlap)
t_full = time.perf_counter() - t0

sa, sb = downscale(a, 8), downscale(b, 8)
t0 = time.perf_counter()
small = find_seam(sa, sb, sa.valid & sb.valid)
t_small = time.perf_counter() - t0
print(f"seam search {t_full:.3f} s at full size, {t_small:.4f} s at 1/8")

up = upscale_labels(small, 8)
print("one transition per row:", bool(np.all(up.transitions() <= 1)))
out = blend(a, b, full)
print("output covers the union:", bool(np.array_equal(out.valid, a.valid | b.valid)))

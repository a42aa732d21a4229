"""Line position, cylinder centre row and focal length for one homography."""
import numpy as np

from halfcyl.geometry import Homography
from halfcyl.params import (
    FocalSearchConfig,
    choose_a0,
    column_heights,
    compute_hD,
    estimate_b0,
    estimate_focal,
    focal_objective,
)

dims = (640, 480)
H = Homography(np.array([[0.85, 0.02, 430.0], [-0.03, 0.9, 30.0], [-2.5e-4, 1e-5, 1.0]]))

a0, side = choose_a0(H, dims, dims)
b0 = estimate_b0(H, dims)
print(f"a0={a0}, side={side.name}, b0={b0:.2f}")

ch = column_heights(H, dims, a0, side)
h1, hw = ch.edge_heights()
hD = compute_hD(dims[1], h1, hw)
print(f"heights at the line {h1:.1f} and far edge {hw:.1f}; desired height {hD:.1f}")

cfg = FocalSearchConfig.for_width(dims[0])
f, degenerate = estimate_focal(ch, a0, hD, cfg)
print(f"f={f:.1f} (degenerate={degenerate}), objective {focal_objective(f, ch, hD):.3f}")

# a coarse scan of the objective for comparison
grid = np.geomspace(cfg.f_min, cfg.f_max, 12)
for g in grid:
    print(f"  f={g:9.1f}  E={focal_objective(g, ch, hD):12.2f}")

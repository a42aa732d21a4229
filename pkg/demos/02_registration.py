"""Features, RANSAC and the similarity scale on a synthetic pair."""
import numpy as np

from halfcyl.pipeline import synthetic_pair, synthetic_stats
from halfcyl.registration import (
    alignment_rmse,
    detect_and_match,
    estimate_homography_ransac,
    fit_similarity,
    selection_scale,
)

pair = synthetic_pair(360, 480, overlap=0.35, perspective=-2e-4, seed=1)
m = detect_and_match(pair.ref, pair.tgt)
print(len(m), "tentative matches")

H, mask = estimate_homography_ransac(m)
src, dst = m.inliers()
print(int(np.sum(mask)), "inliers, RMSE", round(alignment_rmse(H, src, dst), 3), "px")
print("error against the true homography:", round(synthetic_stats(pair, H), 3), "px")
print("relative distance to h_true:", f"{H.distance(pair.h_true):.2e}")

sim = fit_similarity(src, dst)
print("similarity scale s =", round(selection_scale(sim), 4))

"""Preemptive RANSAC on correspondences with 50% gross outliers.

Half of the 200 matches point at random directions; the 3+1-point
hypothesis race still recovers the rotation to a few hundredths of a
degree and classifies the inliers.
"""

import numpy as np

from spherical_sfm import (
    CorrespondenceSet,
    Facing,
    ProblemSpec,
    RansacConfig,
    angular_error,
    generate_problem,
    preemptive_ransac,
)

spec = ProblemSpec(
    facing=Facing.INWARD,
    rotation_magnitude_deg=10.0,
    noise_sigma_px=1.0,
    num_points=200,
    seed=7,
)
problem = generate_problem(spec)

# Corrupt half of the second-view points with uniformly random directions.
rng = np.random.default_rng(99)
v = problem.correspondences.v.copy()
outliers = rng.choice(200, 100, replace=False)
v[outliers, 0] = (rng.uniform(0, 1920, 100) - 960) / 600.0
v[outliers, 1] = (rng.uniform(0, 1080, 100) - 540) / 600.0
corrupted = CorrespondenceSet(u=problem.correspondences.u, v=v)

config = RansacConfig(
    hypothesis_count=200,
    block_size=100,
    inlier_threshold_px=4.0,
    focal_px=600.0,
    seed=1,
)
result = preemptive_ransac(corrupted, Facing.INWARD, config)

true_inliers = np.ones(200, dtype=bool)
true_inliers[outliers] = False
err = angular_error(result.pose.rotation, problem.ground_truth.rotation)
print(f"winning hypothesis: #{result.hypothesis_index} (score {result.score:.1f})")
print(f"rotation error: {np.rad2deg(err):.4f} deg")
print(f"inliers found: {result.inlier_count} / 200")
print(f"recall on true inliers: {result.inlier_mask[true_inliers].mean() * 100:.1f}%")
print(f"false positives among outliers: {int(result.inlier_mask[~true_inliers].sum())}")

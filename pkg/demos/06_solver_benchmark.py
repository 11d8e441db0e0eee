"""Solver benchmark: accuracy vs noise and raw speed, exported as CSV.

Reproduces the synthetic evaluation protocol: noiseless problems measure
numerical accuracy (Frobenius error vs the true essential matrix), noisy
problems at increasing sigma measure angular error with five-point
estimation, and per-solve wall time is averaged over the runs.
"""

import tempfile
from pathlib import Path

from spherical_sfm import ACTION_MATRIX, POLYNOMIAL, Facing, ProblemSpec, run_benchmark
from spherical_sfm.synthetic import write_metrics_csv

TRIALS = 300  # increase to 1000 for the full protocol

grid = []
for facing in (Facing.INWARD, Facing.OUTWARD):
    # Numerical accuracy: minimal 3-point problems, no noise.
    grid.append(
        ProblemSpec(facing=facing, rotation_magnitude_deg=1.0, num_points=4, seed=1)
    )
for sigma in (0.0, 2.0, 5.0, 10.0):
    # Noise sweep: five correspondences for estimation, one held out.
    grid.append(
        ProblemSpec(
            facing=Facing.INWARD,
            rotation_magnitude_deg=1.0,
            noise_sigma_px=sigma,
            num_points=6,
            seed=2,
        )
    )

rows = run_benchmark(grid, trials=TRIALS, method=(ACTION_MATRIX, POLYNOMIAL))

print(f"{'facing':8s} {'theta':5s} {'sigma':5s} {'n':2s} {'method':6s} "
      f"{'median frob':>11s} {'median ang':>10s} {'us/solve':>8s} {'fail':>5s}")
for r in rows:
    ang = f"{r.median_ang_deg:.3f}" if r.median_ang_deg == r.median_ang_deg else "-"
    print(
        f"{r.facing:8s} {r.rotation_magnitude_deg:5.1f} {r.noise_sigma_px:5.1f} "
        f"{r.num_points:2d} {r.method:6s} {r.median_frob:11.2e} {ang:>10s} "
        f"{r.mean_time_us:8.1f} {r.failure_rate:5.2f}"
    )

out = Path(tempfile.mkdtemp(prefix="spherical_sfm_bench_")) / "metrics.csv"
write_metrics_csv(rows, out)
print(f"\nmetrics written to {out}")

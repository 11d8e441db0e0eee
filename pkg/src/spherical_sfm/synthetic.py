"""Random spherical-motion problems, evaluation metrics, and benchmarking.

Problems place camera 1 at the canonical pose, draw a random relative
rotation of the requested magnitude, scatter points in the first camera's
viewing frustum, project into both views at the given focal length, and
add Gaussian pixel noise.  Points behind either camera or outside the
frame are rejected and resampled.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import solver
from .errors import GenerationFailed
from .ransac import sampson_errors
from .so3 import (
    Facing,
    RelativePose,
    Z_AXIS,
    essential_from_relative,
    exp_so3,
    log_so3,
)

INWARD_DEPTH_RANGE = (0.25, 0.75)
OUTWARD_DEPTH_RANGE = (4.0, 8.0)
DEFAULT_FOCAL_PX = 600.0
DEFAULT_IMAGE_SIZE = (1920, 1080)

_MAX_REJECTIONS = 10_000


def default_depth_range(facing: Facing) -> tuple[float, float]:
    return INWARD_DEPTH_RANGE if facing is Facing.INWARD else OUTWARD_DEPTH_RANGE


@dataclass(frozen=True)
class ProblemSpec:
    """Parameters of one random two-view problem family."""

    facing: Facing
    rotation_magnitude_deg: float
    noise_sigma_px: float = 0.0
    focal_px: float = DEFAULT_FOCAL_PX
    num_points: int = 4
    depth_range: tuple[float, float] | None = None
    seed: int = 0
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        if self.depth_range is None:
            object.__setattr__(self, "depth_range", default_depth_range(self.facing))
        lo, hi = self.depth_range
        if not (0 < lo < hi):
            raise ValueError("depth range must satisfy 0 < min < max")
        if self.rotation_magnitude_deg <= 0 or self.focal_px <= 0 or self.num_points < 1:
            raise ValueError("rotation magnitude, focal length, and point count must be positive")
        if self.noise_sigma_px < 0:
            raise ValueError("noise sigma must be non-negative")


@dataclass(frozen=True)
class SyntheticProblem:
    ground_truth: RelativePose
    correspondences: solver.CorrespondenceSet
    ground_truth_essential: np.ndarray


def random_rotation(rng: np.random.Generator, angle_rad: float) -> np.ndarray:
    """Rotation by angle_rad about a uniformly random axis."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return exp_so3(axis * angle_rad)


def generate_problem(spec: ProblemSpec) -> SyntheticProblem:
    """Draw one random problem; deterministic in spec.seed."""
    rng = np.random.default_rng(spec.seed)
    R = random_rotation(rng, np.deg2rad(spec.rotation_magnitude_deg))
    sign = spec.facing.sign
    t1 = sign * Z_AXIS
    f = spec.focal_px
    w, h = spec.image_size
    cx, cy = w / 2.0, h / 2.0
    lo, hi = spec.depth_range

    us = np.empty((spec.num_points, 3))
    vs = np.empty((spec.num_points, 3))
    accepted = 0
    rejections = 0
    while accepted < spec.num_points:
        px = rng.uniform(0.0, w)
        py = rng.uniform(0.0, h)
        u = np.array([(px - cx) / f, (py - cy) / f, 1.0])
        depth = rng.uniform(lo, hi)
        # World point from camera 1, then into camera 2 (same extrinsic z).
        p2 = R @ (depth * u - t1) + t1
        if p2[2] <= 1e-9:
            rejections += 1
            if rejections > _MAX_REJECTIONS:
                raise GenerationFailed("too many points rejected; spec is pathological")
            continue
        x2 = f * p2[0] / p2[2] + cx
        y2 = f * p2[1] / p2[2] + cy
        if not (0.0 <= x2 <= w and 0.0 <= y2 <= h):
            rejections += 1
            if rejections > _MAX_REJECTIONS:
                raise GenerationFailed("too many points rejected; spec is pathological")
            continue
        if spec.noise_sigma_px > 0:
            px, py = px + rng.normal(0, spec.noise_sigma_px), py + rng.normal(0, spec.noise_sigma_px)
            x2, y2 = x2 + rng.normal(0, spec.noise_sigma_px), y2 + rng.normal(0, spec.noise_sigma_px)
        us[accepted] = ((px - cx) / f, (py - cy) / f, 1.0)
        vs[accepted] = ((x2 - cx) / f, (y2 - cy) / f, 1.0)
        accepted += 1

    pose = RelativePose(rotation=R, translation=sign * (Z_AXIS - R[:, 2]), facing=spec.facing)
    return SyntheticProblem(
        ground_truth=pose,
        correspondences=solver.CorrespondenceSet(u=us, v=vs),
        ground_truth_essential=essential_from_relative(pose),
    )


def frobenius_error(e_est: np.ndarray, e_true: np.ndarray) -> float:
    """Frobenius distance after unit normalization, minimized over sign."""
    a = np.asarray(e_est, dtype=float)
    b = np.asarray(e_true, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def angular_error(r_est: np.ndarray, r_true: np.ndarray) -> float:
    """Geodesic distance on SO(3) in radians, in [0, pi]."""
    return float(np.linalg.norm(log_so3(np.asarray(r_true) @ np.asarray(r_est).T)))


def trial_seed(master_seed: int, trial: int) -> int:
    """Per-trial seed derived from (master seed, trial index)."""
    ss = np.random.SeedSequence([int(master_seed), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class BenchmarkRow:
    """Aggregated metrics for one (spec, method) cell."""

    facing: str
    rotation_magnitude_deg: float
    noise_sigma_px: float
    focal_px: float
    num_points: int
    seed: int
    method: str
    trials: int
    median_frob: float
    q25_frob: float
    q75_frob: float
    median_ang_deg: float
    q25_ang_deg: float
    q75_ang_deg: float
    mean_time_us: float
    failure_rate: float


def _disambiguate(
    cands: list[solver.EssentialCandidate],
    u4: np.ndarray,
    v4: np.ndarray,
    focal_px: float,
) -> solver.EssentialCandidate:
    """Pick the candidate with lowest Sampson error on the held-out point."""
    best = None
    best_err = np.inf
    for cand in cands:
        err = float(sampson_errors(cand.essential, u4[None], v4[None], focal_px)[0])
        if err < best_err:
            best, best_err = cand, err
    return best


def run_benchmark(
    spec_grid: list[ProblemSpec],
    trials: int,
    method: str | tuple[str, ...] = (solver.ACTION_MATRIX, solver.POLYNOMIAL),
) -> list[BenchmarkRow]:
    """Run the evaluation protocol over a grid of problem specs.

    Each trial draws a fresh problem (seed derived from the spec seed and
    the trial index), estimates on the first n-1 correspondences, and
    disambiguates among candidates with the held-out last correspondence.
    Solver failures count toward the failure rate instead of raising.

    Args:
        spec_grid: Problem families to evaluate.
        trials: Trials per family (>= 1).
        method: One solver method or a tuple of methods.

    Returns:
        One BenchmarkRow per (spec, method) pair.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    methods = (method,) if isinstance(method, str) else tuple(method)
    rows = []
    for spec in spec_grid:
        problems = [
            generate_problem(replace(spec, seed=trial_seed(spec.seed, t))) for t in range(trials)
        ]
        for meth in methods:
            frob = []
            ang = []
            elapsed = 0.0
            failures = 0
            for prob in problems:
                c = prob.correspondences
                est = c.subset(slice(0, len(c) - 1))
                t0 = time.perf_counter()
                try:
                    cands = solver.solve_essential(est, meth)
                except Exception:
                    cands = []
                elapsed += time.perf_counter() - t0
                if not cands:
                    failures += 1
                    continue
                best = _disambiguate(cands, c.u[-1], c.v[-1], spec.focal_px)
                frob.append(frobenius_error(best.essential, prob.ground_truth_essential))
                try:
                    pose = solver.decompose_essential(best.essential, spec.facing)
                    ang.append(angular_error(pose.rotation, prob.ground_truth.rotation))
                except Exception:
                    failures += 1
                    frob.pop()
            frob_q = np.percentile(frob, [50, 25, 75]) if frob else (np.nan,) * 3
            ang_q = np.rad2deg(np.percentile(ang, [50, 25, 75])) if ang else (np.nan,) * 3
            rows.append(
                BenchmarkRow(
                    facing=spec.facing.value,
                    rotation_magnitude_deg=spec.rotation_magnitude_deg,
                    noise_sigma_px=spec.noise_sigma_px,
                    focal_px=spec.focal_px,
                    num_points=spec.num_points,
                    seed=spec.seed,
                    method=meth,
                    trials=trials,
                    median_frob=float(frob_q[0]),
                    q25_frob=float(frob_q[1]),
                    q75_frob=float(frob_q[2]),
                    median_ang_deg=float(ang_q[0]),
                    q25_ang_deg=float(ang_q[1]),
                    q75_ang_deg=float(ang_q[2]),
                    mean_time_us=elapsed / trials * 1e6,
                    failure_rate=failures / trials,
                )
            )
    return rows


_CSV_FIELDS = [
    "facing", "rotation_magnitude_deg", "noise_sigma_px", "focal_px", "num_points",
    "seed", "method", "trials", "median_frob", "q25_frob", "q75_frob",
    "median_ang_deg", "q25_ang_deg", "q75_ang_deg", "mean_time_us", "failure_rate",
]


def write_metrics_csv(rows: list[BenchmarkRow], path) -> None:
    """Write benchmark rows as CSV, one row per spec x method."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: getattr(row, k) for k in _CSV_FIELDS})


@dataclass
class SequenceTruth:
    """Ground-truth rotations of a generated sequence."""

    facing: Facing
    rotations: list[np.ndarray] = field(default_factory=list)


def generate_circle_sequence(
    num_frames: int,
    num_points: int,
    facing: Facing,
    noise_sigma_px: float = 0.0,
    focal_px: float = DEFAULT_FOCAL_PX,
    seed: int = 0,
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
    full_loop: bool = True,
    depth_range: tuple[float, float] | None = None,
    max_view_angle_deg: float = 75.0,
) -> tuple[dict, dict, SequenceTruth]:
    """Generate a circular spherical-motion sequence with tracked points.

    The camera rotates about the y axis so its center traces a great
    circle; each scene point is anchored in a random frame's frustum and
    observed in every frame within max_view_angle_deg of the anchor where
    it projects inside the image.  The angular window models real feature
    visibility (surface points are not trackable from opposite sides of
    the sphere, where the two-view geometry would degenerate anyway).  A
    full loop makes the last frames overlap frame 0, so the sequence
    exercises loop-closure detection.

    Args:
        num_frames: Number of frames in the sequence.
        num_points: Number of scene points to track.
        facing: Inward or outward camera.
        noise_sigma_px: Gaussian pixel noise added per observation.
        focal_px: Focal length in pixels.
        seed: RNG seed.
        image_size: Frame size in pixels.
        full_loop: Spread frames over the full circle (closing the loop)
            rather than a partial arc.
        depth_range: Point depth range from the anchor camera; defaults to
            the facing-specific range.
        max_view_angle_deg: Feature visibility window around the anchor.

    Returns:
        (tracks dict, intrinsics dict, SequenceTruth) where the dicts match
        the on-disk JSON schemas.
    """
    rng = np.random.default_rng(seed)
    if depth_range is None:
        depth_range = default_depth_range(facing)
    sign = facing.sign
    w, h = image_size
    cx, cy = w / 2.0, h / 2.0
    f = focal_px
    sweep = 2.0 * np.pi if full_loop else np.pi / 2.0
    angles = [sweep * i / num_frames for i in range(num_frames)]
    rotations = [exp_so3(np.array([0.0, a, 0.0])) for a in angles]
    t = sign * Z_AXIS
    window = np.deg2rad(max_view_angle_deg)

    def wrapped_gap(a, b):
        d = abs(a - b) % (2.0 * np.pi)
        return min(d, 2.0 * np.pi - d)

    tracks = []
    for pid in range(num_points):
        anchor = int(rng.integers(num_frames))
        Ra = rotations[anchor]
        for _ in range(200):
            px = rng.uniform(0.0, w)
            py = rng.uniform(0.0, h)
            u = np.array([(px - cx) / f, (py - cy) / f, 1.0])
            depth = rng.uniform(*depth_range)
            X = Ra.T @ (depth * u - t)
            obs = []
            for fidx, R in enumerate(rotations):
                if wrapped_gap(angles[fidx], angles[anchor]) > window:
                    continue
                p = R @ X + t
                if p[2] <= 1e-9:
                    continue
                ox = f * p[0] / p[2] + cx
                oy = f * p[1] / p[2] + cy
                if not (0.0 <= ox <= w and 0.0 <= oy <= h):
                    continue
                if noise_sigma_px > 0:
                    ox += rng.normal(0, noise_sigma_px)
                    oy += rng.normal(0, noise_sigma_px)
                obs.append([fidx, float(ox), float(oy)])
            if len(obs) >= 2:
                tracks.append({"id": pid, "obs": obs})
                break

    tracks_doc = {"frames": num_frames, "tracks": tracks}
    intrinsics_doc = {"focal": f, "pp": [cx, cy], "dist": [], "size": [w, h]}
    return tracks_doc, intrinsics_doc, SequenceTruth(facing=facing, rotations=rotations)

"""End-to-end reconstruction of a spherical-motion image sequence.

Stages: ingest tracked features and intrinsics, estimate sequential
relative rotations with preemptive RANSAC (terminating outlier tracks),
verify loop-closure candidates against an anchor frame, average rotations
globally, and refine with inverse-depth bundle adjustment.  All camera
centers of the result lie on the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bundle, io, solver
from .averaging import RotationGraph, average_rotations_l1, spanning_tree_init
from .errors import NoValidHypothesis
from .ransac import RansacConfig, preemptive_ransac
from .so3 import Facing, camera_center, log_so3
from .synthetic import angular_error


@dataclass(frozen=True)
class PipelineConfig:
    facing: Facing = Facing.OUTWARD
    method: str = solver.ACTION_MATRIX
    seed: int = 0
    threshold_px: float = 2.0
    hypothesis_count: int = 200
    block_size: int = 100
    min_pair_inliers: int = 20
    min_loop_inliers: int = 100
    min_inverse_depth: float = bundle.W_MIN
    loop_anchor: int = 0
    ba_max_iters: int = 50
    averaging_max_iters: int = 100
    averaging_tol: float = 1e-6


@dataclass
class NormalizedTrack:
    """A feature track in normalized camera coordinates."""

    track_id: int
    frames: list[int]
    points: np.ndarray  # (m, 3) homogeneous, z = 1

    def index_of(self, frame: int) -> int | None:
        try:
            return self.frames.index(frame)
        except ValueError:
            return None


@dataclass
class ReconstructionOutput:
    """Final poses, points, and per-stage diagnostics."""

    facing: Facing
    rotations: list[np.ndarray]
    camera_centers: np.ndarray  # (N, 3), all unit norm
    points: list[tuple[int, np.ndarray]]
    diagnostics: dict = field(default_factory=dict)


def ingest(tracks_path, intrinsics_path) -> tuple[list[NormalizedTrack], int, io.IntrinsicsConfig]:
    """Load, validate, undistort, and normalize a tracked sequence.

    Returns:
        (tracks, num_frames, intrinsics) with observations as normalized
        homogeneous camera coordinates.
    """
    tracks_file = io.load_tracks(tracks_path)
    intr = io.load_intrinsics(intrinsics_path)
    io.check_calibration(tracks_file, intr)
    tracks = [
        NormalizedTrack(
            track_id=t.track_id,
            frames=list(t.frames),
            points=io.undistort_normalize(t.pixels, intr),
        )
        for t in tracks_file.tracks
    ]
    return tracks, tracks_file.num_frames, intr


def _pair_correspondences(tracks: list[NormalizedTrack], a: int, b: int):
    """Correspondences between two frames from tracks observing both."""
    ids, us, vs = [], [], []
    for t in tracks:
        ia = t.index_of(a)
        ib = t.index_of(b)
        if ia is not None and ib is not None:
            ids.append(t.track_id)
            us.append(t.points[ia])
            vs.append(t.points[ib])
    if not us:
        return ids, None
    return ids, solver.CorrespondenceSet(u=np.array(us), v=np.array(vs))


def _truncate_track(t: NormalizedTrack, before_frame: int) -> NormalizedTrack:
    keep = [k for k, f in enumerate(t.frames) if f < before_frame]
    return NormalizedTrack(
        track_id=t.track_id,
        frames=[t.frames[k] for k in keep],
        points=t.points[keep] if keep else np.zeros((0, 3)),
    )


def sequential_poses(
    tracks: list[NormalizedTrack],
    num_frames: int,
    facing: Facing,
    config: PipelineConfig,
    focal_px: float,
) -> tuple[RotationGraph, list[NormalizedTrack], list[dict]]:
    """Relative rotations between successive frames, pruning outlier tracks.

    Pairs whose RANSAC consensus falls below min_pair_inliers are recorded
    as failed and contribute no edge.  A track flagged as an outlier at
    pair (i, i+1) is terminated at frame i+1: its later observations are
    dropped from all subsequent processing.
    """
    if num_frames < 2:
        raise ValueError("need at least two frames")
    graph = RotationGraph(num_cameras=num_frames)
    diagnostics = []
    current = list(tracks)
    for i in range(num_frames - 1):
        ids, corr = _pair_correspondences(current, i, i + 1)
        entry = {"pair": (i, i + 1), "matches": len(ids), "inliers": 0, "edge": False}
        if corr is None or len(corr) < 4:
            entry["error"] = "too few correspondences"
            diagnostics.append(entry)
            continue
        cfg = RansacConfig(
            hypothesis_count=config.hypothesis_count,
            block_size=config.block_size,
            inlier_threshold_px=config.threshold_px,
            focal_px=focal_px,
            seed=config.seed + i,
        )
        try:
            result = preemptive_ransac(corr, facing, cfg, config.method)
        except NoValidHypothesis:
            entry["error"] = "no valid hypothesis"
            diagnostics.append(entry)
            continue
        entry["inliers"] = result.inlier_count
        if result.inlier_count < config.min_pair_inliers:
            entry["error"] = "below inlier threshold"
            diagnostics.append(entry)
            continue
        graph.add_edge(i, i + 1, result.pose.rotation, weight=1.0)
        entry["edge"] = True
        diagnostics.append(entry)
        outlier_ids = {tid for tid, ok in zip(ids, result.inlier_mask) if not ok}
        if outlier_ids:
            current = [
                _truncate_track(t, i + 1) if t.track_id in outlier_ids else t for t in current
            ]
            current = [t for t in current if len(t.frames) >= 1]
    return graph, current, diagnostics


def loop_candidates(
    tracks: list[NormalizedTrack], num_frames: int, anchor: int = 0, min_gap: int = 2
):
    """Candidate loop-closure match sets: anchor frame vs. each non-neighbor.

    Candidates are ordered backward from the last frame, following the
    verification order of detect_loop_closures.  Each candidate pairs the
    anchor-frame observations with frame j's observations of the shared
    tracks.
    """
    out = []
    for j in range(num_frames - 1, anchor + min_gap, -1):
        ids, corr = _pair_correspondences(tracks, anchor, j)
        if corr is not None and len(corr) >= 4:
            out.append((anchor, j, corr, ids))
    return out


def detect_loop_closures(
    candidates,
    facing: Facing,
    config: PipelineConfig,
    focal_px: float,
) -> tuple[list, list[dict]]:
    """Verify candidate loop closures in order, stopping at the first failure.

    A candidate is accepted when its RANSAC consensus reaches
    min_loop_inliers; accepted edges carry weight inliers / 100 (capped
    at 5) so strong closures pull harder during averaging.
    """
    edges = []
    diagnostics = []
    for anchor, j, corr, _ids in candidates:
        cfg = RansacConfig(
            hypothesis_count=config.hypothesis_count,
            block_size=config.block_size,
            inlier_threshold_px=config.threshold_px,
            focal_px=focal_px,
            seed=config.seed + 10_000 + j,
        )
        entry = {"pair": (anchor, j), "matches": len(corr), "inliers": 0, "accepted": False}
        try:
            result = preemptive_ransac(corr, facing, cfg, config.method)
        except NoValidHypothesis:
            diagnostics.append(entry)
            break
        entry["inliers"] = result.inlier_count
        if result.inlier_count < config.min_loop_inliers:
            diagnostics.append(entry)
            break
        weight = min(result.inlier_count / 100.0, 5.0)
        edges.append((anchor, j, result.pose.rotation, weight))
        entry["accepted"] = True
        diagnostics.append(entry)
    return edges, diagnostics


def _closure_drift(edges, rotations) -> float | None:
    """Mean angular gap between closure edges and the current estimates."""
    if not edges:
        return None
    gaps = [
        angular_error(rotations[j] @ rotations[i].T, rel) for i, j, rel, _w in edges
    ]
    return float(np.mean(gaps))


def reconstruct(
    tracks: list[NormalizedTrack],
    num_frames: int,
    intrinsics: io.IntrinsicsConfig,
    config: PipelineConfig,
) -> ReconstructionOutput:
    """Run the full pipeline on ingested tracks.

    Raises:
        DisconnectedGraph: the sequential + loop-closure graph does not
            connect all frames (for example after failed pairs).
    """
    focal = intrinsics.focal_px
    graph, pruned, pair_diag = sequential_poses(tracks, num_frames, config.facing, config, focal)
    candidates = loop_candidates(pruned, num_frames, anchor=config.loop_anchor)
    closures, loop_diag = detect_loop_closures(candidates, config.facing, config, focal)
    for i, j, rel, w in closures:
        graph.add_edge(i, j, rel, weight=w)

    init = spanning_tree_init(graph)
    drift_before = _closure_drift(closures, init)
    rotations = average_rotations_l1(
        graph, init, max_iters=config.averaging_max_iters, tol=config.averaging_tol
    )
    drift_after = _closure_drift(closures, rotations)

    ba_tracks = []
    for t in pruned:
        if len(t.frames) < 2:
            continue
        obs = [(f, t.points[k]) for k, f in enumerate(t.frames)]
        ba_tracks.append(bundle.Track(track_id=t.track_id, observations=obs))
    track_graph = bundle.TrackGraph(num_cameras=num_frames, facing=config.facing, tracks=ba_tracks)
    for t in track_graph.tracks:
        t.inverse_depth = bundle.init_inverse_depth(
            t, rotations, config.facing, w_min=config.min_inverse_depth
        )
    state = bundle.BaState(
        rotation_params=np.array([log_so3(r) for r in rotations]), graph=track_graph
    )
    ba_config = bundle.BaConfig(
        max_iters=config.ba_max_iters,
        huber_delta_px=config.threshold_px,
        focal_px=focal,
        min_inverse_depth=config.min_inverse_depth,
    )
    result = bundle.bundle_adjust(state, ba_config)
    final_rotations = result.state.rotations()
    drift_final = _closure_drift(closures, final_rotations)

    centers = np.array([camera_center(r, config.facing) for r in final_rotations])
    points = [
        (t.track_id, bundle.point_from_inverse_depth(t, final_rotations, config.facing))
        for t in result.state.graph.tracks
    ]
    mean_reproj = _mean_reprojection_px(result.state, focal)
    diagnostics = {
        "pairs": pair_diag,
        "loop_closures": loop_diag,
        "num_closures": len(closures),
        "drift_before_averaging": drift_before,
        "drift_after_averaging": drift_after,
        "drift_after_ba": drift_final,
        "ba_status": result.status,
        "ba_initial_cost": result.initial_cost,
        "ba_final_cost": result.final_cost,
        "mean_reprojection_px": mean_reproj,
    }
    return ReconstructionOutput(
        facing=config.facing,
        rotations=final_rotations,
        camera_centers=centers,
        points=points,
        diagnostics=diagnostics,
    )


def _mean_reprojection_px(state: bundle.BaState, focal_px: float) -> float | None:
    r = bundle.reprojection_residuals(state, focal_px)
    if len(r) == 0:
        return None
    return float(np.linalg.norm(r, axis=1).mean())


def run_sfm(tracks_path, intrinsics_path, config: PipelineConfig) -> ReconstructionOutput:
    """ingest + reconstruct in one call."""
    tracks, num_frames, intr = ingest(tracks_path, intrinsics_path)
    return reconstruct(tracks, num_frames, intr, config)

"""Command-line interface: solve, synth, bench, sfm, export."""

from __future__ import annotations

import argparse
import json
import sys

from . import io, pipeline, solver, synthetic
from .ransac import RansacConfig, preemptive_ransac
from .so3 import Facing, log_so3

_METHODS = {"action": solver.ACTION_MATRIX, "poly": solver.POLYNOMIAL}


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--facing", choices=["inward", "outward"], default="outward")
    p.add_argument("--method", choices=["action", "poly"], default="action")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold-px", type=float, default=2.0, help="RANSAC inlier threshold (pixels)")
    p.add_argument("--min-loop-inliers", type=int, default=100)
    p.add_argument("--min-inverse-depth", type=float, default=0.01)


def _pipeline_config(args) -> pipeline.PipelineConfig:
    return pipeline.PipelineConfig(
        facing=Facing.parse(args.facing),
        method=_METHODS[args.method],
        seed=args.seed,
        threshold_px=args.threshold_px,
        min_loop_inliers=args.min_loop_inliers,
        min_inverse_depth=args.min_inverse_depth,
        loop_anchor=getattr(args, "loop_anchor", 0),
    )


def _cmd_solve(args) -> int:
    tracks, num_frames, intr = pipeline.ingest(args.tracks, args.intrinsics)
    a, b = args.frames
    if not (0 <= a < num_frames and 0 <= b < num_frames):
        print(f"frame pair ({a}, {b}) out of range 0..{num_frames - 1}", file=sys.stderr)
        return 2
    _, corr = pipeline._pair_correspondences(tracks, a, b)
    if corr is None or len(corr) < 4:
        print(f"frames {a} and {b} share too few tracks", file=sys.stderr)
        return 2
    cfg = RansacConfig(
        hypothesis_count=args.hypotheses,
        inlier_threshold_px=args.threshold_px,
        focal_px=intr.focal_px,
        seed=args.seed,
    )
    result = preemptive_ransac(corr, Facing.parse(args.facing), cfg, _METHODS[args.method])
    doc = {
        "frames": [a, b],
        "rotation": result.pose.rotation.tolist(),
        "axis_angle": log_so3(result.pose.rotation).tolist(),
        "translation": result.pose.translation.tolist(),
        "facing": args.facing,
        "inliers": result.inlier_count,
        "correspondences": len(corr),
    }
    _emit(doc, args.out)
    return 0


def _cmd_synth(args) -> int:
    tracks_doc, intr_doc, truth = synthetic.generate_circle_sequence(
        num_frames=args.frames,
        num_points=args.points,
        facing=Facing.parse(args.facing),
        noise_sigma_px=args.noise_px,
        focal_px=args.focal,
        seed=args.seed,
        full_loop=not args.no_loop,
    )
    io.save_tracks(tracks_doc, args.out_tracks)
    intr = io.IntrinsicsConfig(
        focal_px=intr_doc["focal"],
        principal_point=tuple(intr_doc["pp"]),
        distortion=tuple(intr_doc["dist"]),
        image_size=tuple(intr_doc["size"]),
    )
    io.save_intrinsics(intr, args.out_intrinsics)
    if args.out_truth:
        with open(args.out_truth, "w") as fh:
            json.dump(
                {"facing": truth.facing.value, "rotations": [r.tolist() for r in truth.rotations]},
                fh,
            )
    print(
        f"wrote {len(tracks_doc['tracks'])} tracks over {args.frames} frames "
        f"to {args.out_tracks}"
    )
    return 0


def _cmd_bench(args) -> int:
    facing = Facing.parse(args.facing)
    grid = [
        synthetic.ProblemSpec(
            facing=facing,
            rotation_magnitude_deg=theta,
            noise_sigma_px=sigma,
            focal_px=args.focal,
            num_points=args.points,
            seed=args.seed,
        )
        for theta in args.theta
        for sigma in args.sigma
    ]
    methods = tuple(_METHODS.values()) if args.method == "both" else (_METHODS[args.method],)
    rows = synthetic.run_benchmark(grid, trials=args.trials, method=methods)
    synthetic.write_metrics_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_sfm(args) -> int:
    config = _pipeline_config(args)
    out = pipeline.run_sfm(args.tracks, args.intrinsics, config)
    io.save_reconstruction(out, args.out)
    d = out.diagnostics
    print(f"cameras: {len(out.rotations)}  points: {len(out.points)}")
    print(f"loop closures accepted: {d['num_closures']}")
    if d["drift_before_averaging"] is not None:
        print(
            f"closure drift (rad): {d['drift_before_averaging']:.6f} before averaging, "
            f"{d['drift_after_averaging']:.6f} after, {d['drift_after_ba']:.6f} after refinement"
        )
    print(f"refinement: {d['ba_status']}, mean reprojection {d['mean_reprojection_px']:.3f} px")
    if args.ply:
        io.export_ply(out, args.ply)
        print(f"point cloud written to {args.ply}")
    print(f"reconstruction written to {args.out}")
    return 0


def _cmd_export(args) -> int:
    out = io.load_reconstruction(args.reconstruction)
    io.export_ply(out, args.out)
    print(f"point cloud written to {args.out}")
    return 0


def _emit(doc: dict, path) -> None:
    if path:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
    else:
        json.dump(doc, sys.stdout, indent=1)
        sys.stdout.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spherical-sfm",
        description="Relative pose and structure from motion for spherical camera motion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="two-view relative pose from a tracks pair")
    p.add_argument("tracks")
    p.add_argument("intrinsics")
    p.add_argument("--frames", type=int, nargs=2, default=[0, 1], metavar=("A", "B"))
    p.add_argument("--hypotheses", type=int, default=200)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    _common_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("synth", help="emit a synthetic spherical-motion track sequence")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--noise-px", type=float, default=1.0)
    p.add_argument("--focal", type=float, default=600.0)
    p.add_argument("--no-loop", action="store_true", help="partial arc instead of a full loop")
    p.add_argument("--out-tracks", required=True)
    p.add_argument("--out-intrinsics", required=True)
    p.add_argument("--out-truth", default=None)
    _common_flags(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="solver benchmark metrics as CSV")
    p.add_argument("--theta", type=float, nargs="+", default=[1.0], help="rotation magnitudes (deg)")
    p.add_argument("--sigma", type=float, nargs="+", default=[0.0], help="noise levels (px)")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--points", type=int, default=4)
    p.add_argument("--focal", type=float, default=600.0)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["action", "poly", "both"], default="both")
    p.add_argument("--facing", choices=["inward", "outward"], default="outward")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("sfm", help="full pipeline: tracks to camera poses and points")
    p.add_argument("tracks")
    p.add_argument("intrinsics")
    p.add_argument("--out", required=True, help="reconstruction JSON path")
    p.add_argument("--ply", default=None, help="also export a PLY point cloud")
    p.add_argument("--loop-anchor", type=int, default=0, help="frame loop closures verify against")
    _common_flags(p)
    p.set_defaults(func=_cmd_sfm)

    p = sub.add_parser("export", help="reconstruction JSON to PLY")
    p.add_argument("reconstruction")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""On-disk formats: tracks and intrinsics JSON, reconstruction JSON, ASCII PLY.

Tracks file:      {"frames": N, "tracks": [{"id": k, "obs": [[frame, px, py], ...]}]}
Intrinsics file:  {"focal": f, "pp": [cx, cy], "dist": [...], "size": [w, h]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationMismatch, ParseError
from .so3 import Facing

_UNDISTORT_ITERS = 10


@dataclass(frozen=True)
class IntrinsicsConfig:
    """Pre-calibrated pinhole intrinsics with radial/tangential distortion."""

    focal_px: float
    principal_point: tuple[float, float]
    distortion: tuple[float, ...] = ()
    image_size: tuple[int, int] = (1920, 1080)

    def __post_init__(self):
        if self.focal_px <= 0:
            raise ValueError("focal length must be positive")
        cx, cy = self.principal_point
        w, h = self.image_size
        if not (0 <= cx <= w and 0 <= cy <= h):
            raise ValueError("principal point must lie within the image bounds")


@dataclass
class PixelTrack:
    """A feature track in pixel coordinates."""

    track_id: int
    frames: list[int]
    pixels: np.ndarray  # (m, 2)


@dataclass
class TracksFile:
    num_frames: int
    tracks: list[PixelTrack] = field(default_factory=list)


def _load_json(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc


def load_intrinsics(path) -> IntrinsicsConfig:
    doc = _load_json(path)
    try:
        return IntrinsicsConfig(
            focal_px=float(doc["focal"]),
            principal_point=(float(doc["pp"][0]), float(doc["pp"][1])),
            distortion=tuple(float(d) for d in doc.get("dist", [])),
            image_size=(int(doc["size"][0]), int(doc["size"][1])),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid intrinsics: {exc}") from exc


def save_intrinsics(intr: IntrinsicsConfig, path) -> None:
    doc = {
        "focal": intr.focal_px,
        "pp": list(intr.principal_point),
        "dist": list(intr.distortion),
        "size": list(intr.image_size),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_tracks(path) -> TracksFile:
    doc = _load_json(path)
    try:
        num_frames = int(doc["frames"])
        tracks = []
        seen = set()
        for t in doc["tracks"]:
            tid = int(t["id"])
            if tid in seen:
                raise ParseError(f"{path}: duplicate track id {tid}")
            seen.add(tid)
            obs = t["obs"]
            frames = [int(o[0]) for o in obs]
            if any(b <= a for a, b in zip(frames, frames[1:])):
                raise ParseError(f"{path}: track {tid} frames are not strictly increasing")
            pixels = np.array([[float(o[1]), float(o[2])] for o in obs])
            tracks.append(PixelTrack(track_id=tid, frames=frames, pixels=pixels))
        return TracksFile(num_frames=num_frames, tracks=tracks)
    except ParseError:
        raise
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid tracks file: {exc}") from exc


def save_tracks(tracks: TracksFile | dict, path) -> None:
    if isinstance(tracks, TracksFile):
        doc = {
            "frames": tracks.num_frames,
            "tracks": [
                {
                    "id": t.track_id,
                    "obs": [[f, float(p[0]), float(p[1])] for f, p in zip(t.frames, t.pixels)],
                }
                for t in tracks.tracks
            ],
        }
    else:
        doc = tracks
    with open(path, "w") as fh:
        json.dump(doc, fh)


def undistort_normalize(pixels: np.ndarray, intr: IntrinsicsConfig) -> np.ndarray:
    """Map pixel coordinates to normalized homogeneous camera coordinates.

    Applies fixed-point undistortion (10 iterations) for radial coefficients
    (k1, k2[, k3]) and tangential (p1, p2); with all-zero coefficients the
    result is exactly ((px - cx) / f, (py - cy) / f, 1).
    """
    pixels = np.atleast_2d(np.asarray(pixels, dtype=float))
    cx, cy = intr.principal_point
    f = intr.focal_px
    xd = (pixels[:, 0] - cx) / f
    yd = (pixels[:, 1] - cy) / f
    dist = intr.distortion
    if any(d != 0 for d in dist):
        k1 = dist[0] if len(dist) > 0 else 0.0
        k2 = dist[1] if len(dist) > 1 else 0.0
        p1 = dist[2] if len(dist) > 2 else 0.0
        p2 = dist[3] if len(dist) > 3 else 0.0
        k3 = dist[4] if len(dist) > 4 else 0.0
        x, y = xd.copy(), yd.copy()
        for _ in range(_UNDISTORT_ITERS):
            r2 = x * x + y * y
            radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
            dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
            dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
            x = (xd - dx) / radial
            y = (yd - dy) / radial
        xd, yd = x, y
    return np.column_stack([xd, yd, np.ones(len(xd))])


def distort_project(points_norm: np.ndarray, intr: IntrinsicsConfig) -> np.ndarray:
    """Forward model of undistort_normalize: normalized points to pixels."""
    pts = np.atleast_2d(np.asarray(points_norm, dtype=float))
    x = pts[:, 0] / pts[:, 2]
    y = pts[:, 1] / pts[:, 2]
    dist = intr.distortion
    if any(d != 0 for d in dist):
        k1 = dist[0] if len(dist) > 0 else 0.0
        k2 = dist[1] if len(dist) > 1 else 0.0
        p1 = dist[2] if len(dist) > 2 else 0.0
        p2 = dist[3] if len(dist) > 3 else 0.0
        k3 = dist[4] if len(dist) > 4 else 0.0
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        xr = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        yr = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        x, y = xr, yr
    cx, cy = intr.principal_point
    f = intr.focal_px
    return np.column_stack([f * x + cx, f * y + cy])


def check_calibration(tracks: TracksFile, intr: IntrinsicsConfig, margin_frac: float = 0.25) -> None:
    """Raise CalibrationMismatch when observations fall far outside the frame."""
    w, h = intr.image_size
    mx = margin_frac * max(w, h)
    for t in tracks.tracks:
        p = t.pixels
        if (
            (p[:, 0] < -mx).any()
            or (p[:, 0] > w + mx).any()
            or (p[:, 1] < -mx).any()
            or (p[:, 1] > h + mx).any()
        ):
            raise CalibrationMismatch(
                f"track {t.track_id} has observations far outside the {w}x{h} frame"
            )


CAMERA_COLOR = (255, 0, 0)  # red camera centers
POINT_COLOR = (0, 0, 255)  # blue scene points


def export_ply(reconstruction, path) -> None:
    """Write camera centers (red) and scene points (blue) as ASCII PLY."""
    centers = np.asarray(reconstruction.camera_centers, dtype=float).reshape(-1, 3)
    points = [np.asarray(p, dtype=float) for _, p in reconstruction.points]
    count = len(centers) + len(points)
    with open(path, "w") as fh:
        fh.write("ply\n")
        fh.write("format ascii 1.0\n")
        fh.write(f"element vertex {count}\n")
        fh.write("property float x\n")
        fh.write("property float y\n")
        fh.write("property float z\n")
        fh.write("property uchar red\n")
        fh.write("property uchar green\n")
        fh.write("property uchar blue\n")
        fh.write("end_header\n")
        for c in centers:
            fh.write(f"{c[0]:.8f} {c[1]:.8f} {c[2]:.8f} {CAMERA_COLOR[0]} {CAMERA_COLOR[1]} {CAMERA_COLOR[2]}\n")
        for p in points:
            fh.write(f"{p[0]:.8f} {p[1]:.8f} {p[2]:.8f} {POINT_COLOR[0]} {POINT_COLOR[1]} {POINT_COLOR[2]}\n")


def save_reconstruction(reconstruction, path) -> None:
    """Serialize a reconstruction (rotations, centers, points, diagnostics) as JSON."""
    doc = {
        "facing": reconstruction.facing.value,
        "rotations": [np.asarray(r).tolist() for r in reconstruction.rotations],
        "camera_centers": np.asarray(reconstruction.camera_centers).tolist(),
        "points": [
            {"id": int(tid), "xyz": np.asarray(p).tolist()} for tid, p in reconstruction.points
        ],
        "diagnostics": reconstruction.diagnostics,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_reconstruction(path):
    from .pipeline import ReconstructionOutput

    doc = _load_json(path)
    try:
        return ReconstructionOutput(
            facing=Facing.parse(doc["facing"]),
            rotations=[np.array(r, dtype=float) for r in doc["rotations"]],
            camera_centers=np.array(doc["camera_centers"], dtype=float),
            points=[(p["id"], np.array(p["xyz"], dtype=float)) for p in doc["points"]],
            diagnostics=doc.get("diagnostics", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid reconstruction file: {exc}") from exc

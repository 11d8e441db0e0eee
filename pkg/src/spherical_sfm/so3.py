"""Rotation algebra and epipolar geometry for cameras constrained to a unit sphere.

A spherical-motion camera sits on the unit sphere with its optical axis
through the sphere center, so its extrinsics are [R | z] (inward-facing,
z = (0,0,1)) or [R | -z] (outward-facing) and the full two-view geometry
is determined by the relative rotation alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMotion

_SMALL_ANGLE = 1e-8
_NEAR_PI_TRACE = -1.0 + 1e-6

DEGENERATE_TRANSLATION = 1e-9

Z_AXIS = np.array([0.0, 0.0, 1.0])


class Facing(enum.Enum):
    """Optical axis pointing toward (inward) or away from (outward) the sphere center."""

    INWARD = "inward"
    OUTWARD = "outward"

    @property
    def sign(self) -> float:
        """+1 for inward, -1 for outward; extrinsic translation is sign * z."""
        return 1.0 if self is Facing.INWARD else -1.0

    @classmethod
    def parse(cls, name: str) -> "Facing":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown facing {name!r}; expected 'inward' or 'outward'") from None


@dataclass(frozen=True)
class RelativePose:
    """Relative pose between two spherical-motion cameras.

    The translation is implied by the rotation: sign * (z - r3) where r3 is
    the third column of the rotation, in unit-sphere chord units.
    """

    rotation: np.ndarray
    translation: np.ndarray
    facing: Facing


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector, [v]x w = v x w."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of hat: extract the 3-vector of a skew-symmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_so3(r: np.ndarray) -> np.ndarray:
    """Rodrigues formula; exp of the zero vector is the identity."""
    r = np.asarray(r, dtype=float)
    theta = float(np.linalg.norm(r))
    k = hat(r)
    k2 = k @ k
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta * theta / 6.0
        b = 0.5 - theta * theta / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * k2


def log_so3(rotation: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix, with norm in [0, pi]."""
    R = np.asarray(rotation, dtype=float)
    cos_theta = np.clip((float(np.trace(R)) - 1.0) / 2.0, -1.0, 1.0)
    s_vec = 0.5 * vee(R - R.T)  # sin(theta) * axis
    sin_theta = float(np.linalg.norm(s_vec))
    theta = float(np.arctan2(sin_theta, cos_theta))

    if theta < _SMALL_ANGLE:
        return s_vec

    if cos_theta < (_NEAR_PI_TRACE - 1.0) / 2.0:  # trace < -1 + 1e-6
        # sin(theta) ~ 0: the symmetric part gives axis axis^T exactly.
        outer = (0.5 * (R + R.T) - cos_theta * np.eye(3)) / (1.0 - cos_theta)
        idx = int(np.argmax(np.diag(outer)))
        axis = outer[idx] / np.sqrt(max(outer[idx, idx], 1e-12))
        axis /= np.linalg.norm(axis)
        # Orient along the (tiny but meaningful) skew part.
        if axis @ s_vec < 0:
            axis = -axis
        return theta * axis

    return (theta / sin_theta) * s_vec


def left_jacobian(r: np.ndarray) -> np.ndarray:
    """Left Jacobian of exp_so3: exp(r + d) ~ exp(hat(J_l(r) d)) exp(r)."""
    r = np.asarray(r, dtype=float)
    theta = float(np.linalg.norm(r))
    k = hat(r)
    k2 = k @ k
    if theta < _SMALL_ANGLE:
        return np.eye(3) + 0.5 * k + (1.0 / 6.0) * k2
    a = (1.0 - np.cos(theta)) / (theta * theta)
    b = (theta - np.sin(theta)) / (theta ** 3)
    return np.eye(3) + a * k + b * k2


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    """True when R is orthonormal with unit determinant within tol."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def rotation_about(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rotation by angle_rad about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0:
        raise ValueError("rotation axis must be non-zero")
    return exp_so3(axis * (angle_rad / n))


def extrinsic_translation(facing: Facing) -> np.ndarray:
    """Translation column of the camera extrinsics [R | t]: sign * z."""
    return facing.sign * Z_AXIS


def camera_center(rotation: np.ndarray, facing: Facing) -> np.ndarray:
    """Camera center -R^T t; always on the unit sphere."""
    return -facing.sign * np.asarray(rotation).T @ Z_AXIS


def relative_pose(R1: np.ndarray, R2: np.ndarray, facing: Facing) -> RelativePose:
    """Relative pose of camera 2 with respect to camera 1.

    The relative rotation is R2 R1^T and the translation is sign * (z - r3),
    r3 being the third column of the relative rotation.
    """
    R = np.asarray(R2, dtype=float) @ np.asarray(R1, dtype=float).T
    t = facing.sign * (Z_AXIS - R[:, 2])
    return RelativePose(rotation=R, translation=t, facing=facing)


def essential_from_rotation(R: np.ndarray, facing: Facing) -> np.ndarray:
    """Essential matrix [t]x R with t implied by the relative rotation."""
    R = np.asarray(R, dtype=float)
    t = facing.sign * (Z_AXIS - R[:, 2])
    if np.linalg.norm(t) < DEGENERATE_TRANSLATION:
        raise DegenerateMotion("relative translation is numerically zero")
    return hat(t) @ R


def essential_from_relative(pose: RelativePose) -> np.ndarray:
    """Essential matrix [t]x R of a relative pose."""
    if np.linalg.norm(pose.translation) < DEGENERATE_TRANSLATION:
        raise DegenerateMotion("relative translation is numerically zero")
    return hat(pose.translation) @ pose.rotation


def essential_params(E: np.ndarray) -> np.ndarray:
    """The six parameters (e1..e6) of a spherical essential matrix."""
    E = np.asarray(E, dtype=float)
    return np.array([E[0, 0], E[0, 1], E[0, 2], E[1, 2], E[2, 0], E[2, 1]])


def essential_from_params(e: np.ndarray) -> np.ndarray:
    """Spherical essential matrix from its six parameters."""
    return np.array(
        [
            [e[0], e[1], e[2]],
            [e[1], -e[0], e[3]],
            [e[4], e[5], 0.0],
        ]
    )


def is_spherical_essential(
    E: np.ndarray,
    structure_tol: float = 1e-9,
    rank_tol: float = 1e-9,
    singular_tol: float = 1e-6,
) -> bool:
    """Check the spherical essential matrix invariants (scale invariant).

    Requires E[2,2] = 0, E[1,0] = E[0,1], E[1,1] = -E[0,0] relative to the
    matrix scale, rank 2, and equal non-zero singular values.
    """
    E = np.asarray(E, dtype=float)
    scale = np.abs(E).max()
    if scale == 0.0:
        return False
    if abs(E[2, 2]) > structure_tol * scale:
        return False
    if abs(E[1, 0] - E[0, 1]) > structure_tol * scale:
        return False
    if abs(E[1, 1] + E[0, 0]) > structure_tol * scale:
        return False
    s = np.linalg.svd(E, compute_uv=False)
    if s[2] > rank_tol * s[0]:
        return False
    return (s[0] - s[1]) <= singular_tol * s[0]

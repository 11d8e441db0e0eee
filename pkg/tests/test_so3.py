import numpy as np
import pytest

from spherical_sfm import so3
from spherical_sfm.errors import DegenerateMotion
from spherical_sfm.so3 import Facing


def test_exp_zero_is_identity():
    assert np.allclose(so3.exp_so3(np.zeros(3)), np.eye(3))


def test_exp_quarter_turn_about_z():
    R = so3.exp_so3(np.array([0.0, 0.0, np.pi / 2]))
    assert np.allclose(R @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-15)


def test_exp_log_round_trip_unit_vectors():
    rng = np.random.default_rng(0)
    for _ in range(200):
        r = rng.normal(size=3)
        r /= np.linalg.norm(r)
        assert np.allclose(so3.log_so3(so3.exp_so3(r)), r, atol=1e-10)


def test_exp_log_round_trip_general_angles():
    rng = np.random.default_rng(1)
    for _ in range(200):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        theta = rng.uniform(1e-8, np.pi - 1e-3)
        r = axis * theta
        assert np.allclose(so3.log_so3(so3.exp_so3(r)), r, atol=1e-10)


def test_log_identity():
    assert np.allclose(so3.log_so3(np.eye(3)), np.zeros(3))


def test_log_one_degree_about_z():
    R = so3.rotation_about([0, 0, 1], np.deg2rad(1.0))
    r = so3.log_so3(R)
    assert abs(np.linalg.norm(r) - np.deg2rad(1.0)) < 1e-12


def test_log_half_turn_about_x():
    R = so3.rotation_about([1, 0, 0], np.pi)
    assert np.trace(R) == pytest.approx(-1.0, abs=1e-12)
    r = so3.log_so3(R)
    assert np.linalg.norm(r) == pytest.approx(np.pi, abs=1e-9)
    axis = r / np.linalg.norm(r)
    assert min(np.linalg.norm(axis - [1, 0, 0]), np.linalg.norm(axis + [1, 0, 0])) < 1e-9


def test_log_near_half_turn_round_trips():
    rng = np.random.default_rng(2)
    for _ in range(100):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        r = axis * (np.pi - 1e-5)
        R = so3.exp_so3(r)
        assert np.allclose(so3.exp_so3(so3.log_so3(R)), R, atol=1e-9)


def test_left_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(50):
        r = rng.normal(size=3)
        J = so3.left_jacobian(r)
        eps = 1e-7
        for k in range(3):
            d = np.zeros(3)
            d[k] = eps
            lhs = so3.exp_so3(r + d)
            rhs = so3.exp_so3(J @ d) @ so3.exp_so3(r)
            assert np.abs(lhs - rhs).max() < 1e-10


def test_relative_pose_zero_motion():
    R = so3.rotation_about([1, 2, 3], 0.7)
    pose = so3.relative_pose(R, R, Facing.INWARD)
    assert np.allclose(pose.rotation, np.eye(3), atol=1e-15)
    assert np.allclose(pose.translation, np.zeros(3), atol=1e-15)


def test_relative_pose_quarter_turn_inward():
    R2 = so3.rotation_about([1, 0, 0], np.pi / 2)
    pose = so3.relative_pose(np.eye(3), R2, Facing.INWARD)
    # r3 = (0, -1, 0), so t = z - r3 = (0, 1, 1).
    assert np.allclose(pose.translation, [0.0, 1.0, 1.0], atol=1e-15)


def test_relative_pose_outward_negates_translation():
    R2 = so3.rotation_about([1, 0, 0], np.pi / 2)
    t_in = so3.relative_pose(np.eye(3), R2, Facing.INWARD).translation
    t_out = so3.relative_pose(np.eye(3), R2, Facing.OUTWARD).translation
    assert np.allclose(t_out, -t_in, atol=1e-15)


def test_relative_pose_translation_invariant():
    rng = np.random.default_rng(4)
    for facing in Facing:
        for _ in range(50):
            R1 = so3.exp_so3(rng.normal(size=3))
            R2 = so3.exp_so3(rng.normal(size=3))
            pose = so3.relative_pose(R1, R2, facing)
            expected = facing.sign * (so3.Z_AXIS - pose.rotation[:, 2])
            assert np.abs(pose.translation - expected).max() < 1e-12


def test_essential_structure():
    pose = so3.relative_pose(np.eye(3), so3.rotation_about([1, 0, 0], np.deg2rad(1.0)), Facing.INWARD)
    E = so3.essential_from_relative(pose)
    assert so3.is_spherical_essential(E)
    assert E[2, 2] == pytest.approx(0.0, abs=1e-15)


def test_essential_invariants_random_poses():
    rng = np.random.default_rng(5)
    for facing in Facing:
        for _ in range(100):
            R1 = so3.exp_so3(rng.normal(size=3))
            R2 = so3.exp_so3(rng.normal(size=3))
            pose = so3.relative_pose(R1, R2, facing)
            if np.linalg.norm(pose.translation) < 1e-6:
                continue
            assert so3.is_spherical_essential(so3.essential_from_relative(pose))


def test_essential_inward_is_minus_outward():
    rng = np.random.default_rng(6)
    for _ in range(20):
        R = so3.exp_so3(rng.normal(size=3))
        e_in = so3.essential_from_rotation(R, Facing.INWARD)
        e_out = so3.essential_from_rotation(R, Facing.OUTWARD)
        assert np.allclose(e_in, -e_out, atol=1e-15)


def test_essential_identity_rotation_degenerate():
    with pytest.raises(DegenerateMotion):
        so3.essential_from_rotation(np.eye(3), Facing.INWARD)


def test_epipolar_constraint_noiseless():
    rng = np.random.default_rng(7)
    for facing in Facing:
        R1 = so3.exp_so3(rng.normal(size=3) * 0.2)
        R2 = so3.exp_so3(rng.normal(size=3) * 0.2)
        pose = so3.relative_pose(R1, R2, facing)
        E = so3.essential_from_relative(pose)
        t1 = so3.extrinsic_translation(facing)
        for _ in range(100):
            u = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0])
            depth = rng.uniform(0.3, 3.0)
            X = R1.T @ (depth * u - t1)
            p2 = R2 @ X + t1
            if abs(p2[2]) < 1e-6:
                continue
            v = p2 / p2[2]
            assert abs(v @ E @ u) < 1e-12


def test_essential_scale_invariance():
    pose = so3.relative_pose(np.eye(3), so3.rotation_about([0, 1, 0], 0.3), Facing.OUTWARD)
    E = so3.essential_from_relative(pose)
    for lam in (1.0, -3.0, 1e-6, 2.5e4):
        assert so3.is_spherical_essential(lam * E)
    bad = E.copy()
    bad[2, 2] = 0.1 * np.abs(E).max()
    for lam in (1.0, -3.0):
        assert not so3.is_spherical_essential(lam * bad)


def test_camera_center_on_unit_sphere():
    rng = np.random.default_rng(8)
    for facing in Facing:
        for _ in range(20):
            R = so3.exp_so3(rng.normal(size=3))
            assert np.linalg.norm(so3.camera_center(R, facing)) == pytest.approx(1.0, abs=1e-12)


def test_is_rotation():
    assert so3.is_rotation(np.eye(3))
    assert not so3.is_rotation(2 * np.eye(3))
    assert not so3.is_rotation(np.diag([1.0, 1.0, -1.0]))


def test_facing_parse():
    assert Facing.parse("inward") is Facing.INWARD
    assert Facing.parse("OUTWARD") is Facing.OUTWARD
    with pytest.raises(ValueError):
        Facing.parse("sideways")

"""Inverse-depth bundle adjustment under the spherical-motion constraint.

Each camera contributes only three rotation parameters (axis-angle); its
translation is the fixed extrinsic column implied by the facing.  Each
track contributes one scalar: the inverse depth w of its point along the
reference-camera ray, so the world point is R_n^T(u_n / w - t_n).  For a
non-reference observation the camera-frame point scaled by w,

    p = Q (u_n - w s z) + w s z,   Q = R_i R_n^T,  s = facing sign,

is linear in w and regular as w -> 0 (points at infinity), which keeps the
problem well conditioned at the small baselines spherical motion produces.
Optimization is Levenberg-Marquardt on the Huber-robustified reprojection
error with the scalar inverse depths eliminated via the Schur complement.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .so3 import Facing, Z_AXIS, exp_so3, left_jacobian

W_MIN = 0.01
BEHIND_CAMERA_Z = 1e-9
BEHIND_CAMERA_CAP_PX = 1e3


@dataclass
class Track:
    """One feature track: observations (camera, normalized point) plus inverse depth."""

    track_id: int
    observations: list[tuple[int, np.ndarray]]
    inverse_depth: float = W_MIN

    def __post_init__(self):
        self.observations = sorted(
            ((int(c), np.asarray(p, dtype=float)) for c, p in self.observations),
            key=lambda cp: cp[0],
        )

    @property
    def reference_camera(self) -> int:
        """The first (lowest-index) camera observing the track."""
        return self.observations[0][0]


@dataclass
class TrackGraph:
    num_cameras: int
    facing: Facing
    tracks: list[Track] = field(default_factory=list)

    def __post_init__(self):
        for t in self.tracks:
            cams = [c for c, _ in t.observations]
            if len(cams) < 2 or len(set(cams)) != len(cams):
                raise ValueError(
                    f"track {t.track_id} needs >= 2 observations in distinct cameras"
                )
            if cams and not (0 <= cams[0] and cams[-1] < self.num_cameras):
                raise ValueError(f"track {t.track_id} observes a camera out of range")


@dataclass
class BaState:
    """Bundle adjustment state: per-camera axis-angle plus the track graph."""

    rotation_params: np.ndarray  # (num_cameras, 3)
    graph: TrackGraph

    def rotations(self) -> list[np.ndarray]:
        return [exp_so3(r) for r in self.rotation_params]

    def inverse_depths(self) -> np.ndarray:
        return np.array([t.inverse_depth for t in self.graph.tracks])


@dataclass(frozen=True)
class BaConfig:
    max_iters: int = 50
    gradient_tol: float = 1e-6  # pixel^2 cost units; ~machine precision at focal 600
    huber_delta_px: float = 2.0
    focal_px: float = 600.0
    min_inverse_depth: float = W_MIN


@dataclass
class BaResult:
    state: BaState
    status: str  # "converged", "max_iters", or "stalled"
    iterations: int
    initial_cost: float
    final_cost: float
    cost_history: list[float]


def huber_cost(squared_px: np.ndarray, delta_px: float) -> np.ndarray:
    """Huber cost of squared pixel residuals: quadratic below delta, linear above."""
    s = np.asarray(squared_px, dtype=float)
    d2 = delta_px * delta_px
    return np.where(s <= d2, s, 2.0 * delta_px * np.sqrt(np.maximum(s, 0.0)) - d2)


def _huber_weight(squared_px: np.ndarray, delta_px: float) -> np.ndarray:
    s = np.asarray(squared_px, dtype=float)
    d2 = delta_px * delta_px
    return np.where(s <= d2, 1.0, delta_px / np.sqrt(np.maximum(s, d2)))


def point_from_inverse_depth(
    track: Track, rotations: list[np.ndarray], facing: Facing
) -> np.ndarray:
    """World point of a track: R_n^T(u_n / w - t_n) for reference camera n."""
    n = track.reference_camera
    u = track.observations[0][1]
    t = facing.sign * Z_AXIS
    return rotations[n].T @ (u / track.inverse_depth - t)


def init_inverse_depth(
    track: Track,
    rotations: list[np.ndarray],
    facing: Facing,
    w_min: float = W_MIN,
) -> float:
    """Linear least-squares inverse depth from all observations of a track.

    Cross-multiplying the perspective division of the w-scaled camera point
    gives two equations linear in w per non-reference observation.  An
    ill-conditioned system (no parallax, e.g. a zero-baseline pair) returns
    w_min, and the estimate is clamped to w_min from below.
    """
    n = track.reference_camera
    u_ref = track.observations[0][1]
    Rn = rotations[n]
    s = facing.sign
    coeffs = []
    rhs = []
    for cam, u_obs in track.observations[1:]:
        Q = rotations[cam] @ Rn.T
        a = Q @ u_ref
        b = s * (Q @ Z_AXIS - Z_AXIS)
        # p = a - w b must align with u_obs: p_x - u_x p_z = 0 and likewise y.
        coeffs.append(b[0] - u_obs[0] * b[2])
        rhs.append(a[0] - u_obs[0] * a[2])
        coeffs.append(b[1] - u_obs[1] * b[2])
        rhs.append(a[1] - u_obs[1] * a[2])
    coeffs = np.array(coeffs)
    rhs = np.array(rhs)
    normal = float(coeffs @ coeffs)
    if normal < 1e-15:
        return w_min
    return max(float(coeffs @ rhs / normal), w_min)


class _Problem:
    """Static observation indexing for vectorized evaluation."""

    def __init__(self, graph: TrackGraph):
        cam, ref, trk, u_ref, u_obs = [], [], [], [], []
        for tid, track in enumerate(graph.tracks):
            n, un = track.observations[0]
            for c, p in track.observations[1:]:
                cam.append(c)
                ref.append(n)
                trk.append(tid)
                u_ref.append(un)
                u_obs.append(p[:2])
        self.cam = np.array(cam, dtype=int)
        self.ref = np.array(ref, dtype=int)
        self.trk = np.array(trk, dtype=int)
        self.u_ref = np.array(u_ref) if u_ref else np.zeros((0, 3))
        self.u_obs = np.array(u_obs) if u_obs else np.zeros((0, 2))
        self.sign = graph.facing.sign
        self.num_obs = len(self.cam)
        self.num_cameras = graph.num_cameras
        self.num_tracks = len(graph.tracks)

    def project(self, rot_mats: np.ndarray, w: np.ndarray):
        """Scaled camera points p (K, 3) and intermediates for Jacobians."""
        Q = np.matmul(rot_mats[self.cam], rot_mats[self.ref].transpose(0, 2, 1))
        d = self.u_ref.copy()
        d[:, 2] -= self.sign * w[self.trk]
        c = np.matmul(Q, d[:, :, None])[:, :, 0]
        p = c.copy()
        p[:, 2] += self.sign * w[self.trk]
        return Q, d, c, p

    def residuals(self, rot_mats: np.ndarray, w: np.ndarray, focal_px: float):
        """Pixel residuals (K, 2), validity mask, and projection intermediates."""
        Q, d, c, p = self.project(rot_mats, w)
        valid = p[:, 2] > BEHIND_CAMERA_Z
        z = np.where(valid, p[:, 2], 1.0)
        proj = p[:, :2] / z[:, None]
        r = focal_px * (self.u_obs - proj)
        return r, valid, Q, d, c, p


def _hat_batch(v: np.ndarray) -> np.ndarray:
    out = np.zeros((len(v), 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def _jacobian_blocks(problem: _Problem, rot_params: np.ndarray, rot_mats, w, focal_px):
    """Residuals plus per-observation Jacobian blocks (d residual / d parameter)."""
    r, valid, Q, d, c, p = problem.residuals(rot_mats, w, focal_px)
    z = np.where(valid, p[:, 2], 1.0)
    x, y = p[:, 0], p[:, 1]
    # d(projection)/dp
    A = np.zeros((problem.num_obs, 2, 3))
    A[:, 0, 0] = 1.0 / z
    A[:, 1, 1] = 1.0 / z
    A[:, 0, 2] = -x / (z * z)
    A[:, 1, 2] = -y / (z * z)
    drdp = -focal_px * A

    jl = np.stack([left_jacobian(rp) for rp in rot_params])
    # Left-increment derivatives chained onto the axis-angle parameters.
    J_cam = np.matmul(np.matmul(drdp, -_hat_batch(c)), jl[problem.cam])
    J_ref = np.matmul(np.matmul(drdp, np.matmul(Q, _hat_batch(d))), jl[problem.ref])
    b = problem.sign * (Q[:, :, 2] - Z_AXIS)
    J_w = np.matmul(drdp, -b[:, :, None])[:, :, 0]

    mask = ~valid
    if mask.any():
        r[mask] = 0.0
        J_cam[mask] = 0.0
        J_ref[mask] = 0.0
        J_w[mask] = 0.0
    return r, valid, J_cam, J_ref, J_w


def _cost_from_residuals(r, valid, delta_px) -> float:
    s = (r * r).sum(axis=1)
    cost = float(huber_cost(s[valid], delta_px).sum())
    cost += float((~valid).sum()) * float(huber_cost(BEHIND_CAMERA_CAP_PX ** 2, delta_px))
    return cost


def reprojection_cost(state: BaState, huber_delta_px: float = 2.0, focal_px: float = 600.0) -> float:
    """Total Huber-robustified reprojection error of a state, in pixel units.

    Observations behind a camera contribute a fixed capped penalty.
    """
    problem = _Problem(state.graph)
    rot_mats = np.stack(state.rotations())
    r, valid, *_ = problem.residuals(rot_mats, state.inverse_depths(), focal_px)
    return _cost_from_residuals(r, valid, huber_delta_px)


def reprojection_residuals(state: BaState, focal_px: float = 600.0) -> np.ndarray:
    """Pixel residuals of all valid non-reference observations, shape (K, 2).

    Observations behind a camera are excluded; reference-camera residuals
    are identically zero and not represented.
    """
    problem = _Problem(state.graph)
    if problem.num_obs == 0:
        return np.zeros((0, 2))
    rot_mats = np.stack(state.rotations())
    r, valid, *_ = problem.residuals(rot_mats, state.inverse_depths(), focal_px)
    return r[valid]


def _sparse_jacobian(problem, J_cam, J_ref, J_w):
    """Assemble the (2K, 3N + T) residual Jacobian."""
    K = problem.num_obs
    nc = 3 * problem.num_cameras
    rows = np.repeat(np.arange(2 * K), 7)
    cols = np.empty((K, 7), dtype=int)
    cols[:, 0:3] = 3 * problem.cam[:, None] + np.arange(3)
    cols[:, 3:6] = 3 * problem.ref[:, None] + np.arange(3)
    cols[:, 6] = nc + problem.trk
    cols = np.tile(cols, (1, 2)).reshape(-1)
    data = np.concatenate(
        [J_cam.transpose(0, 2, 1), J_ref.transpose(0, 2, 1), J_w[:, None, :]], axis=1
    )  # (K, 7, 2)
    data = data.transpose(0, 2, 1).reshape(-1)
    return scipy.sparse.csr_matrix(
        (data, (rows, cols)), shape=(2 * K, nc + problem.num_tracks)
    )


def cost_gradient(
    state: BaState, huber_delta_px: float = 2.0, focal_px: float = 600.0
) -> tuple[float, np.ndarray]:
    """Cost and its analytic gradient over all rotation params and depths.

    The gradient is ordered camera rotations first (3 per camera, including
    camera 0) followed by one inverse depth per track.
    """
    problem = _Problem(state.graph)
    rot_params = np.asarray(state.rotation_params, dtype=float)
    rot_mats = np.stack(state.rotations())
    w = state.inverse_depths()
    r, valid, J_cam, J_ref, J_w = _jacobian_blocks(problem, rot_params, rot_mats, w, focal_px)
    cost = _cost_from_residuals(r, valid, huber_delta_px)
    s = (r * r).sum(axis=1)
    wt = np.where(valid, _huber_weight(s, huber_delta_px), 0.0)
    J = _sparse_jacobian(problem, J_cam, J_ref, J_w)
    grad = 2.0 * (J.T @ (r * wt[:, None]).reshape(-1))
    return cost, grad


def bundle_adjust(state: BaState, config: BaConfig = BaConfig()) -> BaResult:
    """Refine rotations and inverse depths by damped least squares.

    Camera 0 is held fixed (gauge).  Accepted steps never increase the
    robust cost; the damping multiplies by 10 on reject and divides by 10
    on accept.  Terminates on small gradient, relative cost decrease below
    1e-12, or the iteration cap; non-convergence is reported in the result
    status, never raised.
    """
    problem = _Problem(state.graph)
    nc = 3 * problem.num_cameras
    rot_params = np.array(state.rotation_params, dtype=float)
    w = np.maximum(state.inverse_depths(), config.min_inverse_depth)

    def evaluate(params, depths):
        mats = np.stack([exp_so3(p) for p in params])
        r, valid, *_ = problem.residuals(mats, depths, config.focal_px)
        return _cost_from_residuals(r, valid, config.huber_delta_px)

    cost = evaluate(rot_params, w)
    history = [cost]
    initial_cost = cost
    lam = 1e-4
    status = "max_iters"
    iterations = 0

    for _ in range(config.max_iters):
        rot_mats = np.stack([exp_so3(p) for p in rot_params])
        r, valid, J_cam, J_ref, J_w = _jacobian_blocks(
            problem, rot_params, rot_mats, w, config.focal_px
        )
        s = (r * r).sum(axis=1)
        wt = np.where(valid, _huber_weight(s, config.huber_delta_px), 0.0)
        J = _sparse_jacobian(problem, J_cam, J_ref, J_w)
        g = (J.T @ (r * wt[:, None]).reshape(-1))
        if 2.0 * np.abs(g).max(initial=0.0) < config.gradient_tol:
            status = "converged"
            break
        sw = np.sqrt(wt)
        Jw = scipy.sparse.diags(np.repeat(sw, 2)) @ J
        H = (Jw.T @ Jw).toarray()
        # Gauge: pin camera 0 by giving it an identity block and zero gradient.
        H[:3, :] = 0.0
        H[:, :3] = 0.0
        H[:3, :3] = np.eye(3)
        g = g.copy()
        g[:3] = 0.0

        accepted = False
        while lam <= 1e10:
            damped = H.copy()
            diag = np.maximum(np.diagonal(H), 1e-12)
            damped[np.diag_indices_from(damped)] += lam * diag
            try:
                delta = _schur_solve(damped, -g, nc)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            new_params = rot_params + delta[:nc].reshape(-1, 3)
            new_w = np.maximum(w + delta[nc:], config.min_inverse_depth)
            new_cost = evaluate(new_params, new_w)
            if new_cost <= cost:
                rel_decrease = (cost - new_cost) / max(cost, 1e-300)
                rot_params = _canonicalize(new_params)
                w = new_w
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                iterations += 1
                history.append(new_cost)
                if rel_decrease < 1e-12:
                    status = "converged"
                cost = new_cost
                break
            lam *= 10.0
        if not accepted:
            status = "stalled"
            break
        if status == "converged":
            break

    new_tracks = [
        dataclasses.replace(t, observations=list(t.observations), inverse_depth=float(w[i]))
        for i, t in enumerate(state.graph.tracks)
    ]
    new_graph = TrackGraph(
        num_cameras=state.graph.num_cameras, facing=state.graph.facing, tracks=new_tracks
    )
    return BaResult(
        state=BaState(rotation_params=rot_params, graph=new_graph),
        status=status,
        iterations=iterations,
        initial_cost=initial_cost,
        final_cost=cost,
        cost_history=history,
    )


def _canonicalize(params: np.ndarray) -> np.ndarray:
    """Wrap axis-angle rows back into norm <= pi (same rotations)."""
    out = np.array(params, dtype=float)
    norms = np.linalg.norm(out, axis=1)
    for i, n in enumerate(norms):
        if n > np.pi:
            out[i] *= 1.0 - 2.0 * np.pi / n
    return out


def _schur_solve(H: np.ndarray, rhs: np.ndarray, nc: int) -> np.ndarray:
    """Solve H x = rhs eliminating the scalar depth block (diagonal) first."""
    if H.shape[0] == nc:
        return np.linalg.solve(H, rhs)
    Hcc = H[:nc, :nc]
    Hcw = H[:nc, nc:]
    hww = np.diagonal(H)[nc:]
    if np.any(hww <= 0):
        raise np.linalg.LinAlgError("non-positive depth diagonal")
    gc = rhs[:nc]
    gw = rhs[nc:]
    ratio = Hcw / hww[None, :]
    S = Hcc - ratio @ Hcw.T
    dc = np.linalg.solve(S, gc - ratio @ gw)
    dw = (gw - Hcw.T @ dc) / hww
    return np.concatenate([dc, dw])

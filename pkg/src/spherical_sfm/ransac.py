"""Robust two-view relative pose estimation with preemptive hypothesis scoring.

Hypotheses come from random minimal 3-point samples; each sample's candidate
essential matrices are disambiguated on a fourth randomly drawn point.  All
hypotheses then race breadth-first over the observations: after every block
of scored observations the worse half is dropped, and the survivor's inlier
set is classified by Sampson error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import solver
from .errors import DegenerateMotion, NoValidHypothesis
from .so3 import Facing, RelativePose


@dataclass(frozen=True)
class RansacConfig:
    hypothesis_count: int = 200
    block_size: int = 100
    inlier_threshold_px: float = 2.0
    focal_px: float = 600.0
    seed: int = 0

    def __post_init__(self):
        if self.hypothesis_count < 1 or self.block_size < 1:
            raise ValueError("hypothesis_count and block_size must be >= 1")
        if self.inlier_threshold_px <= 0:
            raise ValueError("inlier threshold must be positive")


@dataclass(frozen=True)
class RansacResult:
    pose: RelativePose
    essential: np.ndarray
    inlier_mask: np.ndarray  # (n,) bool
    inlier_count: int
    score: float
    hypothesis_index: int


def sampson_error(E: np.ndarray, u: np.ndarray, v: np.ndarray, focal_px: float) -> float:
    """First-order epipolar error of one correspondence, in pixels.

    focal * |v^T E u| / sqrt((Eu)_1^2 + (Eu)_2^2 + (E^T v)_1^2 + (E^T v)_2^2);
    +inf when the denominator vanishes (point at both epipoles).
    """
    return float(sampson_errors(E, np.atleast_2d(u), np.atleast_2d(v), focal_px)[0])


def sampson_errors(E: np.ndarray, u: np.ndarray, v: np.ndarray, focal_px: float) -> np.ndarray:
    """Vectorized Sampson error over (n, 3) correspondence arrays."""
    E = np.asarray(E, dtype=float)
    Eu = u @ E.T
    Etv = v @ E
    num = np.abs(np.einsum("ni,ni->n", v, Eu))
    den = np.sqrt(Eu[:, 0] ** 2 + Eu[:, 1] ** 2 + Etv[:, 0] ** 2 + Etv[:, 1] ** 2)
    out = np.full(len(u), np.inf)
    ok = den >= 1e-15
    out[ok] = focal_px * num[ok] / den[ok]
    return out


def _sampson_block(Es: np.ndarray, u: np.ndarray, v: np.ndarray, focal_px: float) -> np.ndarray:
    """Sampson errors for stacked essentials (h, 3, 3) over a block: (h, m)."""
    Eu = np.matmul(Es, u.T)  # (h, 3, m)
    Etv = np.matmul(Es.transpose(0, 2, 1), v.T)
    num = np.abs((Eu * v.T[None]).sum(axis=1))
    den = np.sqrt(Eu[:, 0] ** 2 + Eu[:, 1] ** 2 + Etv[:, 0] ** 2 + Etv[:, 1] ** 2)
    out = np.full(num.shape, np.inf)
    ok = den >= 1e-15
    out[ok] = focal_px * num[ok] / den[ok]
    return out


def preemptive_ransac(
    c: solver.CorrespondenceSet,
    facing: Facing,
    cfg: RansacConfig,
    method: str = solver.ACTION_MATRIX,
) -> RansacResult:
    """Estimate the relative pose of a correspondence set with outliers.

    Deterministic for a fixed (input, seed): all random sample sets and the
    observation scoring order are drawn up front from one seeded stream.
    Hypotheses are scored on truncated Sampson error (capped at the inlier
    threshold); ties on the final score break toward the lower hypothesis
    index.

    Raises:
        NoValidHypothesis: fewer than 4 correspondences, or every sampled
            minimal set failed the solver.
    """
    n = len(c)
    if n < 4:
        raise NoValidHypothesis("preemptive RANSAC needs at least 4 correspondences")
    rng = np.random.default_rng(cfg.seed)
    sample_sets = [rng.choice(n, size=4, replace=False) for _ in range(cfg.hypothesis_count)]
    order = rng.permutation(n)

    poses: list[RelativePose] = []
    essentials = []
    hyp_index = []
    for h, idx in enumerate(sample_sets):
        try:
            cands = solver.solve_essential(c.subset(idx[:3]), method)
        except (solver.RankDeficient, solver.EliminationFailed):
            continue
        if not cands:
            continue
        u4 = c.u[idx[3]][None]
        v4 = c.v[idx[3]][None]
        best = None
        best_err = np.inf
        for cand in cands:
            err = sampson_errors(cand.essential, u4, v4, cfg.focal_px)[0]
            if err < best_err:
                best, best_err = cand, err
        try:
            pose = solver.decompose_essential(best.essential, facing)
        except DegenerateMotion:
            continue
        poses.append(pose)
        essentials.append(best.essential)
        hyp_index.append(h)
    if not poses:
        raise NoValidHypothesis("all sampled minimal sets failed the solver")

    Es = np.stack(essentials)
    active = np.arange(len(poses))
    scores = np.zeros(len(poses))
    threshold = cfg.inlier_threshold_px
    pos = 0
    while pos < n and len(active) > 1:
        block = order[pos : pos + cfg.block_size]
        errs = _sampson_block(Es[active], c.u[block], c.v[block], cfg.focal_px)
        scores[active] += np.minimum(errs, threshold).sum(axis=1)
        pos += len(block)
        if pos < n and len(active) > 1:
            keep = math.ceil(len(active) / 2)
            ranked = active[np.argsort(scores[active], kind="stable")]
            active = np.sort(ranked[:keep])

    winner = int(active[np.argmin(scores[active])])
    errs = sampson_errors(Es[winner], c.u, c.v, cfg.focal_px)
    mask = errs <= threshold
    return RansacResult(
        pose=poses[winner],
        essential=Es[winner],
        inlier_mask=mask,
        inlier_count=int(mask.sum()),
        score=float(scores[winner]),
        hypothesis_index=hyp_index[winner],
    )

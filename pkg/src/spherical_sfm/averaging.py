"""Global camera orientations from pairwise relative rotations.

Edges carry R_ij = R_j R_i^T.  A spanning tree from camera 0 (sequential
edges first) gives the initialization; a robust averaging stage then
iterates reweighted tangent-space solves over the whole graph.  Edge
residuals log(R_j^T R_ij R_i) enter a redescending reweighting scheme
(quadratic core, Geman-McClure tail): consistent noise is distributed
around cycles while gross outlier edges lose essentially all influence.
The solution is gauge-fixed so camera 0 is the identity.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraph, NonConvergenceWarning
from .so3 import exp_so3, log_so3

_RESIDUAL_FLOOR = 1e-12

DEFAULT_LOSS_SCALE_RAD = 0.1


@dataclass(frozen=True)
class RotationEdge:
    i: int
    j: int
    rotation: np.ndarray  # R_ij = R_j R_i^T
    weight: float = 1.0


@dataclass
class RotationGraph:
    num_cameras: int
    edges: list[RotationEdge] = field(default_factory=list)

    def add_edge(self, i: int, j: int, rotation: np.ndarray, weight: float = 1.0) -> None:
        if i == j:
            raise ValueError("self edges are not allowed")
        if not (0 <= i < self.num_cameras and 0 <= j < self.num_cameras):
            raise ValueError("edge endpoints out of range")
        if weight <= 0:
            raise ValueError("edge weight must be positive")
        self.edges.append(RotationEdge(i=i, j=j, rotation=np.asarray(rotation, dtype=float), weight=weight))


def _adjacency(graph: RotationGraph):
    """Per-camera list of (neighbor, R taking this camera to the neighbor, weight, sequential)."""
    adj = [[] for _ in range(graph.num_cameras)]
    for e in graph.edges:
        seq = abs(e.i - e.j) == 1
        adj[e.i].append((e.j, e.rotation, e.weight, seq))
        adj[e.j].append((e.i, e.rotation.T, e.weight, seq))
    return adj


def _check_connected(adj) -> None:
    n = len(adj)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j, *_ in adj[i]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    if not all(seen):
        missing = [k for k, s in enumerate(seen) if not s]
        raise DisconnectedGraph(f"cameras unreachable from camera 0: {missing[:8]}")


def spanning_tree_init(graph: RotationGraph) -> list[np.ndarray]:
    """BFS composition of edge rotations from camera 0.

    Sequential edges (|i - j| = 1) are preferred globally: the tree first
    exhausts sequential connectivity, and only bridges remaining cameras
    with the highest-weight non-sequential edge crossing the cut.  Camera 0
    is the identity.
    """
    adj = _adjacency(graph)
    rotations: list[np.ndarray | None] = [None] * graph.num_cameras
    rotations[0] = np.eye(3)
    queue = deque([0])
    while True:
        while queue:
            i = queue.popleft()
            for j, r_ij, _, seq in adj[i]:
                if seq and rotations[j] is None:
                    rotations[j] = r_ij @ rotations[i]
                    queue.append(j)
        if all(r is not None for r in rotations):
            break
        bridge = None
        for i in range(graph.num_cameras):
            if rotations[i] is None:
                continue
            for j, r_ij, w, seq in adj[i]:
                if seq or rotations[j] is not None:
                    continue
                if bridge is None or w > bridge[0] or (w == bridge[0] and j < bridge[2]):
                    bridge = (w, i, j, r_ij)
        if bridge is None:
            missing = [k for k, r in enumerate(rotations) if r is None]
            raise DisconnectedGraph(f"cameras unreachable from camera 0: {missing[:8]}")
        _, i, j, r_ij = bridge
        rotations[j] = r_ij @ rotations[i]
        queue.append(j)
    return rotations


def average_rotations_l1(
    graph: RotationGraph,
    init: list[np.ndarray],
    max_iters: int = 100,
    tol: float = 1e-6,
    loss_scale_rad: float = DEFAULT_LOSS_SCALE_RAD,
) -> list[np.ndarray]:
    """Robust refinement of global rotations.

    Each iteration computes the tangent residual of every edge, assigns it
    the redescending weight w / (1 + (|residual| / scale)^2)^2, and solves
    the weighted graph Laplacian for simultaneous per-camera corrections
    (applied as R_i <- R_i exp(eps_i)).  An exactly consistent graph
    produces a zero correction on the first iteration.  Converged when the
    largest correction angle falls below tol; hitting max_iters first
    raises NonConvergenceWarning and returns the current iterate.

    Args:
        graph: Connected rotation graph.
        init: Initial rotations (for example from spanning_tree_init).
        max_iters: Iteration cap.
        tol: Convergence threshold on the max correction angle (radians).
        loss_scale_rad: Residual angle where down-weighting sets in;
            residuals well below it behave quadratically, far beyond it
            (gross outlier edges) their influence falls off as 1/r^4.
    """
    adj = _adjacency(graph)
    _check_connected(adj)
    n = graph.num_cameras
    rotations = [np.array(r, dtype=float) for r in init]
    if n == 1 or not graph.edges:
        return [r @ rotations[0].T for r in rotations]

    idx_i = np.array([e.i for e in graph.edges])
    idx_j = np.array([e.j for e in graph.edges])
    base_w = np.array([e.weight for e in graph.edges])

    converged = False
    for _ in range(max_iters):
        rho = np.stack(
            [
                log_so3(rotations[e.j].T @ e.rotation @ rotations[e.i])
                for e in graph.edges
            ]
        )
        norms = np.maximum(np.linalg.norm(rho, axis=1), _RESIDUAL_FLOOR)
        wt = base_w / (1.0 + (norms / loss_scale_rad) ** 2) ** 2

        lap = np.zeros((n, n))
        np.add.at(lap, (idx_i, idx_i), wt)
        np.add.at(lap, (idx_j, idx_j), wt)
        np.add.at(lap, (idx_i, idx_j), -wt)
        np.add.at(lap, (idx_j, idx_i), -wt)
        rhs = np.zeros((n, 3))
        np.add.at(rhs, idx_j, wt[:, None] * rho)
        np.add.at(rhs, idx_i, -wt[:, None] * rho)

        # Gauge: camera 0 correction fixed to zero.
        eps = np.zeros((n, 3))
        eps[1:] = np.linalg.solve(lap[1:, 1:], rhs[1:])
        step = float(np.linalg.norm(eps, axis=1).max())
        if step >= tol:
            for k in range(n):
                rotations[k] = rotations[k] @ exp_so3(eps[k])
        if step < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"rotation averaging did not reach tol={tol} within {max_iters} iterations",
            NonConvergenceWarning,
        )

    # Re-gauge so camera 0 is the identity (right multiplication preserves
    # all relative rotations).
    gauge = rotations[0].T
    return [r @ gauge for r in rotations]

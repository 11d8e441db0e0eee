"""Minimal 3-point solvers for the spherical-motion essential matrix.

The essential matrix of two cameras on a unit sphere has the six-parameter
form [[e1, e2, e3], [e2, -e1, e4], [e5, e6, 0]].  Stacking one epipolar
constraint per correspondence gives an n x 6 linear system whose right
nullspace (dimension 3 in the minimal case) is spanned by b1, b2, b3, so
E = x*E(b1) + y*E(b2) + z*E(b3).  Fixing z = 1 and enforcing the essential
matrix cubic constraint E E^T E - 1/2 trace(E E^T) E = 0 (rows 2 and 3 give
six independent equations) leaves a polynomial system in (x, y) with at
most four solutions, solved here two ways:

* action matrix: Gauss-Jordan elimination of the 6x10 coefficient matrix
  under graded reverse lexicographic monomial order yields a Groebner basis;
  the multiplication-by-x action on the quotient basis {y^2, x, y, 1} is a
  4x4 matrix whose eigenvalues are the x solutions.
* single polynomial: a reordered elimination reduces the system to a 3x3
  matrix B(y) with null vector (x^2, x, 1); det B(y) is a quartic in y
  solved in closed form, and x follows from the null vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, quartic
from .errors import (
    DegenerateMotion,
    EliminationFailed,
    InsufficientCorrespondences,
    RankDeficient,
)
from .so3 import Facing, RelativePose, Z_AXIS

GREVLEX = "grevlex"  # x^3, x^2 y, x y^2, y^3, x^2, x y, y^2, x, y, 1
REORDERED = "reordered"  # x^3, x^2 y, x y^2, y^3, y^2, y, x^2, x y, x, 1

ACTION_MATRIX = "action"
POLYNOMIAL = "poly"

IMAG_TOL = _kernels._IMAG_TOL
PIVOT_TOL = _kernels._PIVOT_TOL
_RANK_TOL = 1e-10

# Column permutation taking grevlex monomials to the reordered set.
_REORDER_PERM = np.array([0, 1, 2, 3, 6, 8, 4, 5, 7, 9])

_DECOMP_D = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class CorrespondenceSet:
    """Paired camera-normalized homogeneous points for two views."""

    u: np.ndarray  # (n, 3), third component 1
    v: np.ndarray  # (n, 3)

    @classmethod
    def from_points(cls, u: np.ndarray, v: np.ndarray) -> "CorrespondenceSet":
        """Build from (n, 2) or (n, 3) arrays, renormalizing to z = 1."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if u.shape[1] == 2:
            u = np.column_stack([u, np.ones(len(u))])
        if v.shape[1] == 2:
            v = np.column_stack([v, np.ones(len(v))])
        u = u / u[:, 2:3]
        v = v / v[:, 2:3]
        if u.shape != v.shape:
            raise ValueError("u and v must pair up one-to-one")
        return cls(u=u, v=v)

    def __len__(self) -> int:
        return len(self.u)

    def subset(self, idx) -> "CorrespondenceSet":
        return CorrespondenceSet(u=self.u[idx], v=self.v[idx])


@dataclass(frozen=True)
class ConstraintSystem:
    """6x10 cubic-constraint coefficients over a declared monomial order."""

    matrix: np.ndarray  # (6, 10)
    order: str
    basis: np.ndarray  # (3, 6) nullspace rows b1, b2, b3


@dataclass(frozen=True)
class EssentialCandidate:
    """One (x, y) solution with its unit-Frobenius essential matrix."""

    x: float
    y: float
    essential: np.ndarray


def build_epipolar_system(c: CorrespondenceSet) -> np.ndarray:
    """Stack the epipolar constraints into an (n, 6) coefficient matrix.

    Row i is (u1 v1 - u2 v2, u1 v2 + u2 v1, u3 v1, u3 v2, u1 v3, u2 v3),
    so that row @ (e1..e6) = v^T E u for the six-parameter form.
    """
    if len(c) < 3:
        raise InsufficientCorrespondences(f"need at least 3 correspondences, got {len(c)}")
    return _kernels.epipolar_rows(c.u, c.v)


def compute_nullspace(m: np.ndarray) -> np.ndarray:
    """Three orthonormal 6-vectors spanning the (least-squares) right nullspace.

    For n = 3 this is the exact nullspace; for n > 3 the right singular
    vectors of the three smallest singular values.
    """
    s, vt = _kernels.nullspace_svd(np.ascontiguousarray(m, dtype=np.float64))
    if s[0] < 1e-300 or s[2] <= _RANK_TOL * s[0]:
        raise RankDeficient("epipolar system has rank < 3 (degenerate points)")
    return vt[3:6]


def build_cubic_constraints(basis: np.ndarray, order: str = GREVLEX) -> ConstraintSystem:
    """Expand the essential cubic constraint over the nullspace basis.

    Rows 2 and 3 of E E^T E - 1/2 trace(E E^T) E with E = x B1 + y B2 + B3
    give six cubic polynomials in (x, y); their coefficients are returned
    as a 6x10 matrix over the requested monomial order.
    """
    if order not in (GREVLEX, REORDERED):
        raise ValueError(f"unknown monomial order {order!r}")
    basis = np.ascontiguousarray(basis, dtype=np.float64)
    A = _kernels.constraints_grevlex(basis)
    if order == REORDERED:
        A = A[:, _REORDER_PERM]
    return ConstraintSystem(matrix=A, order=order, basis=basis)


def _eliminate(a: np.ndarray) -> np.ndarray:
    """Gauss-Jordan reduce (6, 10) to [I6 | G] with partial pivoting.

    Returns G (6, 4); a pivot below PIVOT_TOL means the reduction is
    unreliable and raises EliminationFailed.
    """
    g, ok = _kernels.gauss_jordan(np.ascontiguousarray(a, dtype=np.float64))
    if not ok:
        raise EliminationFailed("pivot below tolerance in Gauss-Jordan elimination")
    return g


_AX_LAST_ROW = np.array([0.0, 1.0, 0.0, 0.0])


def action_matrix(system: ConstraintSystem) -> np.ndarray:
    """The 4x4 multiplication-by-x matrix on the quotient basis {y^2, x, y, 1}."""
    if system.order != GREVLEX:
        raise ValueError("action matrix requires the grevlex monomial order")
    G = _eliminate(system.matrix)
    ax = np.empty((4, 4))
    np.negative(G[[2, 4, 5]], out=ax[:3])
    ax[3] = _AX_LAST_ROW
    return ax


def action_matrix_roots(system: ConstraintSystem) -> tuple[np.ndarray, np.ndarray]:
    """Complex (x, y) root pairs from the action-matrix eigendecomposition.

    Returns (xs, ys) of length 4 before any realness filtering; y comes
    from the eigenvector ratio of the y and 1 basis components.
    """
    w, vec = np.linalg.eig(action_matrix(system))
    denom = vec[3]
    bad = np.abs(denom) < 1e-300
    if not bad.any():
        return w, vec[2] / denom
    # A vanishing constant component means the root sits at infinity in the
    # dehomogenized chart; fall back to the y^2 / y component ratio.
    ys = np.empty(4, dtype=complex)
    ys[~bad] = vec[2, ~bad] / denom[~bad]
    ys[bad] = vec[0, bad] / np.where(np.abs(vec[2, bad]) < 1e-300, 1.0, vec[2, bad])
    return w, ys


def _quartic_from_g(G: np.ndarray) -> tuple[float, float, float, float, float]:
    """Quartic coefficients (highest first) of det B(y) from the reduced rows."""
    # Rows 4..6 over free monomials [x^2, x y, x, 1]:
    a1, c1, b1, d1 = G[3]
    a2, c2, b2, d2 = G[4]
    a3, c3, b3, d3 = G[5]
    # det B(y) expanded along the third column; the 2x2 minors are linear in y.
    p1 = a2 * b3 - a3 * b2
    q1 = a2 * c3 - a3 * c2
    p2 = a1 * b3 - a3 * b1
    q2 = a1 * c3 - a3 * c1
    p3 = a1 * b2 - a2 * b1
    q3 = a1 * c2 - a2 * c1
    return (
        q1,
        p1 - q2,
        q3 - p2,
        d1 * q1 - d2 * q2 + d3 * q3 + p3,
        d1 * p1 - d2 * p2 + d3 * p3,
    )


def reduced_quartic(system: ConstraintSystem) -> np.ndarray:
    """Quartic coefficients (highest first) of det B(y) after elimination."""
    if system.order != REORDERED:
        raise ValueError("the quartic reduction requires the reordered monomial order")
    return np.array(_quartic_from_g(_eliminate(system.matrix)))


def _candidates(basis: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> list[EssentialCandidate]:
    """Assemble unit-Frobenius essential matrices for (x, y) root pairs."""
    if len(xs) == 0:
        return []
    mats, norms = _kernels.essential_candidates(basis, xs, ys)
    out = []
    for i, n in enumerate(norms.tolist()):
        if n < 1e-300:
            continue
        out.append(EssentialCandidate(x=float(xs[i]), y=float(ys[i]), essential=mats[i]))
    return out


def solve_action_matrix(system: ConstraintSystem) -> list[EssentialCandidate]:
    """All essential matrices via eigendecomposition of the action matrix."""
    if system.order != GREVLEX:
        raise ValueError("action matrix requires the grevlex monomial order")
    G = _eliminate(system.matrix)
    xs, ys, count = _kernels.action_roots(G)
    return _candidates(system.basis, xs[:count], ys[:count])


def solve_polynomial(system: ConstraintSystem) -> list[EssentialCandidate]:
    """All essential matrices via the closed-form quartic in y."""
    if system.order != REORDERED:
        raise ValueError("the quartic reduction requires the reordered monomial order")
    G = _eliminate(system.matrix)
    roots = quartic.solve_quartic(*_quartic_from_g(G))
    ys = np.array(quartic.real_roots(roots, IMAG_TOL))
    if len(ys) == 0:
        return []
    xs = _kernels.poly_x_from_roots(G, ys)
    return _candidates(system.basis, xs, ys)


def solve_essential(c: CorrespondenceSet, method: str = ACTION_MATRIX) -> list[EssentialCandidate]:
    """Solve for all spherical essential matrices consistent with n >= 3 points."""
    m = build_epipolar_system(c)
    basis = compute_nullspace(m)
    if method == ACTION_MATRIX:
        return solve_action_matrix(build_cubic_constraints(basis, GREVLEX))
    if method == POLYNOMIAL:
        return solve_polynomial(build_cubic_constraints(basis, REORDERED))
    raise ValueError(f"unknown solver method {method!r}")


def decompose_essential(E: np.ndarray, facing: Facing) -> RelativePose:
    """Recover the spherical-motion relative pose from an essential matrix.

    The twisted-pair decomposition yields rotations R_a = U D V^T and
    R_b = U D^T V^T plus the translation direction U[:, 2]; the rotation
    whose implied spherical translation best aligns with that direction
    (score |t . t_hat| / ||t||) wins.
    """
    U, _, Vt = np.linalg.svd(np.asarray(E, dtype=float))
    if np.linalg.det(U) < 0:
        U = U.copy()
        U[:, 2] = -U[:, 2]
    if np.linalg.det(Vt) < 0:
        Vt = Vt.copy()
        Vt[2, :] = -Vt[2, :]
    Ra = U @ _DECOMP_D @ Vt
    Rb = U @ _DECOMP_D.T @ Vt
    t_hat = U[:, 2]
    sign = facing.sign
    ta = sign * (Z_AXIS - Ra[:, 2])
    tb = sign * (Z_AXIS - Rb[:, 2])
    na = np.linalg.norm(ta)
    nb = np.linalg.norm(tb)
    if na < 1e-9 and nb < 1e-9:
        raise DegenerateMotion("both twisted-pair translations are numerically zero")
    sa = abs(ta @ t_hat) / na if na >= 1e-9 else -np.inf
    sb = abs(tb @ t_hat) / nb if nb >= 1e-9 else -np.inf
    if sa > sb:
        return RelativePose(rotation=Ra, translation=ta, facing=facing)
    return RelativePose(rotation=Rb, translation=tb, facing=facing)


def solve_relative_pose(
    c: CorrespondenceSet, facing: Facing, method: str = ACTION_MATRIX
) -> list[RelativePose]:
    """Full chain from correspondences to candidate relative poses.

    Candidates whose decomposition is degenerate (zero translation) are
    dropped; an empty list is a valid outcome.
    """
    poses = []
    for cand in solve_essential(c, method):
        try:
            poses.append(decompose_essential(cand.essential, facing))
        except DegenerateMotion:
            continue
    return poses

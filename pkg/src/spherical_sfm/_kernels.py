"""Numba kernels for the fixed-size inner loops of the minimal solver.

Everything here works on small fixed-shape arrays (3x6 systems, 6x10
constraint matrices, 4x4 action matrices), where interpreter and wrapper
overhead would otherwise dominate the runtime.  Results are identical to
the straightforward numpy formulations; compiled code is cached on disk
after the first call.
"""

import numpy as np
from numba import njit

_PIVOT_TOL = 1e-12
_IMAG_TOL = 1e-6


def _monomial_table() -> np.ndarray:
    # Monomial index of the (a, b, c) basis triple under grevlex order
    # [x^3, x^2 y, x y^2, y^3, x^2, x y, y^2, x, y, 1]; basis index 0 is x,
    # 1 is y, 2 is the constant.
    order = {
        (3, 0): 0, (2, 1): 1, (1, 2): 2, (0, 3): 3,
        (2, 0): 4, (1, 1): 5, (0, 2): 6, (1, 0): 7, (0, 1): 8, (0, 0): 9,
    }
    table = np.zeros((3, 3, 3), dtype=np.int64)
    for a in range(3):
        for b in range(3):
            for c in range(3):
                nx = (a == 0) + (b == 0) + (c == 0)
                ny = (a == 1) + (b == 1) + (c == 1)
                table[a, b, c] = order[(nx, ny)]
    return table


_MONO = _monomial_table()


@njit(cache=True)
def epipolar_rows(u, v):
    """Rows of the stacked epipolar system for the six-parameter form."""
    n = u.shape[0]
    out = np.empty((n, 6))
    for i in range(n):
        u1, u2, u3 = u[i, 0], u[i, 1], u[i, 2]
        v1, v2, v3 = v[i, 0], v[i, 1], v[i, 2]
        out[i, 0] = u1 * v1 - u2 * v2
        out[i, 1] = u1 * v2 + u2 * v1
        out[i, 2] = u3 * v1
        out[i, 3] = u3 * v2
        out[i, 4] = u1 * v3
        out[i, 5] = u2 * v3
    return out


@njit(cache=True)
def nullspace_svd(m):
    """Singular values and right singular vectors of the epipolar system."""
    _, s, vt = np.linalg.svd(m)
    return s, vt


@njit(cache=True)
def structured_matrices(params):
    """Map (k, 6) parameter rows to (k, 3, 3) structured essential matrices."""
    k = params.shape[0]
    out = np.empty((k, 3, 3))
    for i in range(k):
        e1, e2, e3, e4, e5, e6 = params[i]
        out[i, 0, 0] = e1
        out[i, 0, 1] = e2
        out[i, 0, 2] = e3
        out[i, 1, 0] = e2
        out[i, 1, 1] = -e1
        out[i, 1, 2] = e4
        out[i, 2, 0] = e5
        out[i, 2, 1] = e6
        out[i, 2, 2] = 0.0
    return out


@njit(cache=True)
def constraints_grevlex(basis):
    """6x10 coefficients of rows 2 and 3 of E E^T E - 1/2 tr(E E^T) E.

    E = x B1 + y B2 + B3 over the structured matrices of the basis rows;
    coefficients are grouped under grevlex monomial order.
    """
    B = structured_matrices(basis)
    A = np.zeros((6, 10))
    P = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            for i in range(3):
                for j in range(3):
                    acc = 0.0
                    for t in range(3):
                        acc += B[a, i, t] * B[b, j, t]
                    P[i, j] = acc
            tr = P[0, 0] + P[1, 1] + P[2, 2]
            for c in range(3):
                m = _MONO[a, b, c]
                for i in range(1, 3):
                    for k in range(3):
                        val = (
                            P[i, 0] * B[c, 0, k]
                            + P[i, 1] * B[c, 1, k]
                            + P[i, 2] * B[c, 2, k]
                            - 0.5 * tr * B[c, i, k]
                        )
                        A[(i - 1) * 3 + k, m] += val
    return A


@njit(cache=True)
def gauss_jordan(a):
    """Reduce the 6x10 system to [I6 | G] with partial pivoting.

    Returns (G, ok); ok is False when a pivot falls below tolerance.
    """
    m = a.copy()
    for col in range(6):
        piv_row = col
        piv_val = abs(m[col, col])
        for r in range(col + 1, 6):
            v = abs(m[r, col])
            if v > piv_val:
                piv_val = v
                piv_row = r
        if piv_val < _PIVOT_TOL:
            return np.zeros((6, 4)), False
        if piv_row != col:
            for j in range(10):
                tmp = m[col, j]
                m[col, j] = m[piv_row, j]
                m[piv_row, j] = tmp
        inv = 1.0 / m[col, col]
        for j in range(col, 10):
            m[col, j] *= inv
        for r in range(6):
            if r != col:
                f = m[r, col]
                if f != 0.0:
                    for j in range(col, 10):
                        m[r, j] -= f * m[col, j]
    return m[:, 6:].copy(), True


@njit(cache=True)
def action_roots(G):
    """Real (x, y) roots from the eigendecomposition of the action matrix.

    The action matrix multiplies the quotient basis {y^2, x, y, 1} by x;
    real eigenvalues give x and the eigenvector component ratio y/1 gives
    y.  Returns (xs, ys, count).
    """
    ax = np.zeros((4, 4), dtype=np.complex128)
    for j in range(4):
        ax[0, j] = -G[2, j]
        ax[1, j] = -G[4, j]
        ax[2, j] = -G[5, j]
    ax[3, 1] = 1.0
    w, vec = np.linalg.eig(ax)
    xs = np.empty(4)
    ys = np.empty(4)
    count = 0
    for i in range(4):
        wi = w[i]
        bound = abs(wi.real)
        if bound < 1.0:
            bound = 1.0
        if abs(wi.imag) <= _IMAG_TOL * bound:
            denom = vec[3, i]
            if abs(denom) >= 1e-300:
                y = (vec[2, i] / denom).real
            elif abs(vec[2, i]) >= 1e-300:
                y = (vec[0, i] / vec[2, i]).real
            else:
                y = 0.0
            xs[count] = wi.real
            ys[count] = y
            count += 1
    return xs, ys, count


@njit(cache=True)
def poly_x_from_roots(G, ys):
    """x values for quartic roots y via the null vector of B(y).

    B(y) is the 3x3 matrix from the reordered elimination whose null
    vector is proportional to (x^2, x, 1); x is the x/1 component ratio,
    cross-checked against x^2/x when both are well conditioned.
    """
    k = ys.shape[0]
    xs = np.empty(k)
    b_mat = np.empty((3, 3))
    for r in range(k):
        y = ys[r]
        for row in range(3):
            b_mat[row, 0] = G[3 + row, 0]
            b_mat[row, 1] = G[3 + row, 2] + G[3 + row, 1] * y
        b_mat[0, 2] = G[3, 3] + y ** 3
        b_mat[1, 2] = G[4, 3] + y ** 2
        b_mat[2, 2] = G[5, 3] + y
        _, _, vt = np.linalg.svd(b_mat)
        nv0, nv1, nv2 = vt[2, 0], vt[2, 1], vt[2, 2]
        if abs(nv2) >= 1e-300:
            x = nv1 / nv2
        elif abs(nv1) >= 1e-300:
            x = nv0 / nv1
        else:
            x = 0.0
        if abs(x) > 1e-8 and abs(nv1) > 1e-12 and abs(nv2) >= 1e-300:
            x = 0.5 * (x + nv0 / nv1)
        xs[r] = x
    return xs


@njit(cache=True)
def essential_candidates(basis, xs, ys):
    """Unit-Frobenius structured matrices for (x, y) root pairs."""
    k = xs.shape[0]
    params = np.empty((k, 6))
    norms = np.empty(k)
    for i in range(k):
        nsq = 0.0
        for j in range(6):
            p = xs[i] * basis[0, j] + ys[i] * basis[1, j] + basis[2, j]
            params[i, j] = p
            nsq += p * p
        # e1 and e2 appear twice in the structured matrix.
        nsq += params[i, 0] ** 2 + params[i, 1] ** 2
        norms[i] = np.sqrt(nsq)
    mats = structured_matrices(params)
    for i in range(k):
        if norms[i] >= 1e-300:
            inv = 1.0 / norms[i]
            for a in range(3):
                for b in range(3):
                    mats[i, a, b] *= inv
    return mats, norms

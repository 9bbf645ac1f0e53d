"""Reference computations written independently of the package internals."""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def loop_stiffness(vertices, triangles):
    """P1 stiffness via per-element Jacobian inverses (no vectorization)."""
    n = len(vertices)
    A = np.zeros((n, n))
    dref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    for tri in triangles:
        x = vertices[tri]
        J = np.column_stack([x[1] - x[0], x[2] - x[0]])
        area = abs(np.linalg.det(J)) / 2
        G = dref @ np.linalg.inv(J)
        A[np.ix_(tri, tri)] += area * G @ G.T
    return A


def brute_force_locate(vertices, triangles, point, tol=1e-12):
    """First triangle whose affine-map preimage of ``point`` lies in the reference triangle."""
    p = np.asarray(point, float)
    for k, tri in enumerate(triangles):
        x = vertices[tri]
        J = np.column_stack([x[1] - x[0], x[2] - x[0]])
        s, t = np.linalg.solve(J, p - x[0])
        lam = np.array([1 - s - t, s, t])
        if (lam >= -tol).all():
            return k, lam
    return None, None


def poisson_dirac_solve(vertices, triangles, boundary, points, weights):
    """Dense-assembled Poisson solve with a sum of weighted point loads."""
    A = loop_stiffness(vertices, triangles)
    b = np.zeros(len(vertices))
    for p, w in zip(points, weights):
        k, lam = brute_force_locate(vertices, triangles, p)
        b[triangles[k]] += w * lam
    interior = np.flatnonzero(~boundary)
    x = np.zeros(len(vertices))
    x[interior] = spla.spsolve(sp.csc_matrix(A[np.ix_(interior, interior)]), b[interior])
    return x


def poisson_p0_solve(vertices, triangles, boundary, cell_values):
    """Poisson solve with a piecewise constant source (load = u_T |T| / 3 per vertex)."""
    A = loop_stiffness(vertices, triangles)
    b = np.zeros(len(vertices))
    for tri, u in zip(triangles, cell_values):
        x = vertices[tri]
        area = abs(np.linalg.det(np.column_stack([x[1] - x[0], x[2] - x[0]]))) / 2
        b[tri] += u * area / 3
    interior = np.flatnonzero(~boundary)
    y = np.zeros(len(vertices))
    y[interior] = np.linalg.solve(A[np.ix_(interior, interior)], b[interior])
    return y


def barycentric_eval(vertices, triangles, coeffs, point):
    k, lam = brute_force_locate(vertices, triangles, point)
    return float(coeffs[triangles[k]] @ lam)

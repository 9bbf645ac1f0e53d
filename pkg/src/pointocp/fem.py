"""P1/P0 finite element spaces on a :class:`TriMesh`.

Matrices are ``scipy.sparse.csr_matrix`` with sorted column indices.
Coefficient fields accepted by the assembly routines ("fields") may be a
scalar, a vectorized callable ``f(x, y)``, a :class:`P1Function`, a
:class:`P0Function`, or an array of values at the quadrature points with
shape ``(n_triangles, n_quadrature_points)``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import MeshMismatch, NegativeReactionCoefficient, SolverDivergence
from .mesh import TriMesh, locate_point
from .quadrature import triangle_rule

ASSEMBLY_DEGREE = 4
ERROR_DEGREE = 7
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class P1Function:
    mesh: TriMesh
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} vertex coefficients, got shape {c.shape}")
        object.__setattr__(self, "coefficients", c)

    def __sub__(self, other):
        _same_mesh(self, other)
        return P1Function(self.mesh, self.coefficients - other.coefficients)


@dataclass(frozen=True, eq=False)
class P0Function:
    mesh: TriMesh
    cell_values: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cell_values, dtype=float)
        if c.shape != (self.mesh.n_triangles,):
            raise ValueError(f"expected {self.mesh.n_triangles} cell values, got shape {c.shape}")
        object.__setattr__(self, "cell_values", c)

    @classmethod
    def constant(cls, mesh, value):
        return cls(mesh, np.full(mesh.n_triangles, float(value)))

    def __sub__(self, other):
        _same_mesh(self, other)
        return P0Function(self.mesh, self.cell_values - other.cell_values)


def _same_mesh(f, g):
    if f.mesh is not g.mesh:
        raise MeshMismatch("operands live on different meshes")


# --- sparsity pattern -------------------------------------------------------

_patterns: "weakref.WeakKeyDictionary[TriMesh, tuple]" = weakref.WeakKeyDictionary()


def _pattern(mesh: TriMesh):
    """CSR structure of P1 matrices plus the map from local (M, 3, 3) entries."""
    pat = _patterns.get(mesh)
    if pat is None:
        t = mesh.triangles
        n = mesh.n_vertices
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        keys, scatter = np.unique(rows * n + cols, return_inverse=True)
        indices = (keys % n).astype(np.int32)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(keys // n, minlength=n), out=indptr[1:])
        pat = (indptr, indices, scatter.ravel())
        _patterns[mesh] = pat
    return pat


def _from_local(mesh: TriMesh, local: np.ndarray) -> sp.csr_matrix:
    indptr, indices, scatter = _pattern(mesh)
    data = np.bincount(scatter, weights=local.ravel(), minlength=indices.size)
    n = mesh.n_vertices
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


# --- sampling -----------------------------------------------------------------

def quadrature_points(mesh: TriMesh, degree: int) -> np.ndarray:
    """Physical quadrature points, shape (M, nq, 2)."""
    rule = triangle_rule(degree)
    return np.einsum("qi,mid->mqd", rule.points, mesh.corners)


def sample(mesh: TriMesh, field, degree: int) -> np.ndarray:
    """Values of ``field`` at the quadrature points of every triangle."""
    rule = triangle_rule(degree)
    shape = (mesh.n_triangles, rule.n_points)
    if isinstance(field, P1Function):
        _check_mesh(field, mesh)
        return field.coefficients[mesh.triangles] @ rule.points.T
    if isinstance(field, P0Function):
        _check_mesh(field, mesh)
        return np.repeat(field.cell_values[:, None], rule.n_points, axis=1)
    if callable(field):
        xq = quadrature_points(mesh, degree)
        vals = np.asarray(field(xq[..., 0], xq[..., 1]), dtype=float)
        return np.broadcast_to(vals, shape)
    arr = np.asarray(field, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape != shape:
        raise ValueError(f"quadrature samples must have shape {shape}, got {arr.shape}")
    return arr


def _check_mesh(f, mesh):
    if f.mesh is not mesh:
        raise MeshMismatch("function does not live on the given mesh")


# --- assembly -----------------------------------------------------------------

def assemble_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """Unconstrained P1 stiffness matrix (grad phi_j, grad phi_i)."""
    g = mesh.grad_lambda
    local = mesh.areas[:, None, None] * np.einsum("mid,mjd->mij", g, g)
    return _from_local(mesh, local)


def assemble_mass(mesh: TriMesh, coefficient=1.0, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    """Consistent weighted mass matrix (c phi_j, phi_i) by quadrature.

    The coefficient is a reaction term and must be nonnegative at every
    quadrature point.
    """
    rule = triangle_rule(degree)
    c = sample(mesh, coefficient, degree)
    if c.size and c.min() < -NEGATIVE_TOL:
        raise NegativeReactionCoefficient(f"reaction coefficient reaches {c.min():.3e} < 0")
    lam = rule.points
    local = np.einsum("m,mq,qi,qj->mij", mesh.areas, c * rule.weights, lam, lam)
    return _from_local(mesh, local)


def assemble_load(mesh: TriMesh, f, degree: int = ASSEMBLY_DEGREE) -> np.ndarray:
    """Load vector (f, phi_i)."""
    rule = triangle_rule(degree)
    vals = sample(mesh, f, degree)
    local = mesh.areas[:, None] * ((vals * rule.weights) @ rule.points)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def dirac_load(mesh: TriMesh, point, weight: float) -> np.ndarray:
    """Vector ``weight * phi_i(point)``."""
    loc = locate_point(mesh, point)
    b = np.zeros(mesh.n_vertices)
    np.add.at(b, mesh.triangles[loc.triangle_index], weight * np.asarray(loc.barycentric))
    return b


def point_eval(f: P1Function, point) -> float:
    loc = locate_point(f.mesh, point)
    return float(np.dot(f.coefficients[f.mesh.triangles[loc.triangle_index]], loc.barycentric))


def interpolate(mesh: TriMesh, g) -> P1Function:
    """Nodal P1 interpolant of a callable ``g(x, y)``."""
    v = mesh.vertices
    return P1Function(mesh, np.asarray(g(v[:, 0], v[:, 1]), dtype=float) * np.ones(mesh.n_vertices))


def cell_average(f: P1Function) -> np.ndarray:
    """Exact cell means of a P1 function (the centroid values)."""
    return f.coefficients[f.mesh.triangles].mean(axis=1)


def l2_project_to_p0(mesh: TriMesh, f, degree: int = ASSEMBLY_DEGREE) -> P0Function:
    """Cellwise averages (1/|T|) int_T f."""
    if isinstance(f, P0Function):
        _check_mesh(f, mesh)
        return P0Function(mesh, f.cell_values.copy())
    if isinstance(f, P1Function):
        _check_mesh(f, mesh)
        return P0Function(mesh, cell_average(f))
    rule = triangle_rule(degree)
    return P0Function(mesh, sample(mesh, f, degree) @ rule.weights)


# --- norms --------------------------------------------------------------------

def norm(f, kind: str = "l2", minus=None, degree: int = ERROR_DEGREE) -> float:
    """Norm of ``f`` or of ``f - minus``.

    ``kind`` is ``"l2"``, ``"h1"`` (gradient seminorm) or ``"linf"``. The
    ``linf`` value is a maximum over quadrature points and vertices, not a
    true supremum. With ``kind="h1"`` a callable ``minus`` must return the
    gradient ``(gx, gy)`` of the comparison function.
    """
    mesh = f.mesh
    if minus is not None and not callable(minus):
        if minus.mesh is not mesh:
            raise MeshMismatch("cannot compare functions on different meshes")
    if kind == "h1":
        return _h1_seminorm(f, minus, degree)
    if kind not in ("l2", "linf"):
        raise ValueError(f"unknown norm kind {kind!r}")
    rule = triangle_rule(degree)
    vals = sample(mesh, f, degree)
    if minus is not None:
        vals = vals - sample(mesh, minus, degree)
    if kind == "l2":
        if isinstance(f, P0Function) and (minus is None or isinstance(minus, P0Function)):
            return float(np.sqrt(np.dot(mesh.areas, vals[:, 0] ** 2)))
        return float(np.sqrt(np.dot(mesh.areas, (vals**2) @ rule.weights)))
    m = float(np.abs(vals).max())
    if isinstance(f, P1Function) and not isinstance(minus, P0Function):
        vv = f.coefficients.copy()
        if minus is not None:
            v = mesh.vertices
            vv -= minus(v[:, 0], v[:, 1]) if callable(minus) else minus.coefficients
        m = max(m, float(np.abs(vv).max()))
    return m


def _h1_seminorm(f, minus, degree):
    mesh = f.mesh
    if not isinstance(f, P1Function):
        raise TypeError("the H1 seminorm is defined for P1 functions only")
    grad = np.einsum("mi,mid->md", f.coefficients[mesh.triangles], mesh.grad_lambda)
    if minus is None:
        return float(np.sqrt(np.dot(mesh.areas, (grad**2).sum(axis=1))))
    if isinstance(minus, P1Function):
        g2 = np.einsum("mi,mid->md", minus.coefficients[mesh.triangles], mesh.grad_lambda)
        return float(np.sqrt(np.dot(mesh.areas, ((grad - g2) ** 2).sum(axis=1))))
    rule = triangle_rule(degree)
    xq = quadrature_points(mesh, degree)
    gx, gy = minus(xq[..., 0], xq[..., 1])
    err2 = (grad[:, None, 0] - gx) ** 2 + (grad[:, None, 1] - gy) ** 2
    return float(np.sqrt(np.dot(mesh.areas, err2 @ rule.weights)))


# --- linear algebra -----------------------------------------------------------

def dirichlet_reduce(A: sp.spmatrix, mesh: TriMesh) -> sp.csr_matrix:
    """Restrict a full P1 matrix to the interior vertices."""
    idx = mesh.interior
    return A.tocsr()[idx][:, idx].tocsr()


def pcg(A, b, rel_tol=1e-12, max_iter=None, precond=None):
    """Preconditioned conjugate gradients (Jacobi preconditioner by default)."""
    n = b.size
    max_iter = 20 * n if max_iter is None else max_iter
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0.0:
        return x
    if precond is None:
        dinv = 1.0 / A.diagonal()
        precond = lambda r: dinv * r  # noqa: E731
    r = b.copy()
    z = precond(r)
    d = z.copy()
    rz = r @ z
    target = rel_tol * bnorm
    for _ in range(max_iter):
        Ad = A @ d
        step = rz / (d @ Ad)
        x += step * d
        r -= step * Ad
        if np.linalg.norm(r) <= target:
            # recursive residual drifts; confirm with the true one
            r = b - A @ x
            if np.linalg.norm(r) <= target:
                return x
        z = precond(r)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise SolverDivergence(f"PCG did not reach rel_tol={rel_tol:g} in {max_iter} iterations")


def solve_spd(A, b, rel_tol: float = 1e-12, method: str = "direct", max_iter=None) -> np.ndarray:
    """Solve ``A x = b`` for a reduced SPD system with ``|Ax - b| <= rel_tol |b|``.

    ``method="direct"`` uses a sparse LU factorization followed by up to
    three steps of iterative refinement; ``method="pcg"`` runs Jacobi-PCG
    capped at ``20 * dim`` iterations.
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    if method == "pcg":
        return pcg(A, b, rel_tol=rel_tol, max_iter=max_iter)
    if method != "direct":
        raise ValueError(f"unknown solver method {method!r}")
    lu = spla.splu(sp.csc_matrix(A))
    x = lu.solve(b)
    for _ in range(3):
        r = b - A @ x
        if np.linalg.norm(r) <= rel_tol * bnorm:
            return x
        x += lu.solve(r)
    r = b - A @ x
    if np.linalg.norm(r) <= rel_tol * bnorm:
        return x
    raise SolverDivergence(
        f"direct solve residual {np.linalg.norm(r) / bnorm:.3e} exceeds rel_tol={rel_tol:g}"
    )

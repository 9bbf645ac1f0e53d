"""Structured triangulations of axis-aligned rectangles.

Meshes are built by splitting every grid cell along its lower-left to
upper-right diagonal and refined by edge-midpoint bisection, so every
refined mesh is nested in its parent and coincides (up to ordering) with
the structured mesh of twice the resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import PointOutsideDomain

LOCATE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation of the rectangle ``extents = (x0, x1, y0, y1)``.

    ``parent`` maps each triangle to its parent triangle in ``parent_mesh``
    (both ``None`` for a root mesh). Instances are treated as immutable and
    compare/hash by identity.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex: np.ndarray
    extents: tuple = (0.0, 1.0, 0.0, 1.0)
    level: int = 0
    parent_mesh: Optional["TriMesh"] = field(default=None, repr=False)
    parent: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary_vertex):
            arr.setflags(write=False)
        if self.parent is not None:
            self.parent.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def interior(self) -> np.ndarray:
        """Indices of vertices not on the boundary (the V_h unknowns)."""
        return np.flatnonzero(~self.boundary_vertex)

    @cached_property
    def corners(self) -> np.ndarray:
        """Triangle vertex coordinates, shape (M, 3, 2)."""
        return self.vertices[self.triangles]

    @cached_property
    def signed_areas(self) -> np.ndarray:
        c = self.corners
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def grad_lambda(self) -> np.ndarray:
        """Gradients of the barycentric coordinates, shape (M, 3, 2)."""
        c = self.corners
        two_a = 2.0 * self.signed_areas
        g = np.empty_like(c)
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            # grad(lambda_i) = rot90(x_k - x_j) / 2A
            g[:, i, 0] = (c[:, j, 1] - c[:, k, 1]) / two_a
            g[:, i, 1] = (c[:, k, 0] - c[:, j, 0]) / two_a
        return g

    @cached_property
    def h_max(self) -> float:
        c = self.corners
        edges = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 1], c[:, 0] - c[:, 2]], axis=1)
        return float(np.sqrt((edges**2).sum(axis=2)).max())

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges (E, 2) and the triangle-to-edge map (M, 3).

        Local edge ``i`` joins local vertices ``i`` and ``(i + 1) % 3``.
        """
        t = self.triangles
        pairs = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
        pairs = np.sort(pairs, axis=1)
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        return uniq, inverse.reshape(-1, 3)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)


@dataclass(frozen=True)
class PointLocation:
    triangle_index: int
    barycentric: tuple


def _boundary_flags(vertices: np.ndarray, extents) -> np.ndarray:
    x0, x1, y0, y1 = extents
    x, y = vertices[:, 0], vertices[:, 1]
    return (x == x0) | (x == x1) | (y == y0) | (y == y1)


def rectangle_mesh(n: int, extents=(0.0, 1.0, 0.0, 1.0)) -> TriMesh:
    """Structured ``n x n`` mesh of a rectangle with ``2 n^2`` triangles."""
    if int(n) != n or n < 1:
        raise ValueError(f"mesh resolution must be a positive integer, got {n!r}")
    n = int(n)
    x0, x1, y0, y1 = map(float, extents)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"degenerate rectangle {extents!r}")
    xs = x0 + (x1 - x0) * np.arange(n + 1) / n
    ys = y0 + (y1 - y0) * np.arange(n + 1) / n
    xs[-1], ys[-1] = x1, y1
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + n + 1
    v11 = v01 + 1
    tri = np.empty((2 * n * n, 3), dtype=np.int64)
    tri[0::2] = np.column_stack([v00, v10, v11])
    tri[1::2] = np.column_stack([v00, v11, v01])
    ext = (x0, x1, y0, y1)
    return TriMesh(vertices, tri, _boundary_flags(vertices, ext), ext, 0)


def unit_square_mesh(n: int) -> TriMesh:
    return rectangle_mesh(n)


def uniform_refine(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four congruent children via edge midpoints.

    Children of triangle ``k`` are ``4k .. 4k+3``: the three corner
    triangles followed by the middle one.
    """
    edges, tri_edges = mesh.edges
    nv = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    t = mesh.triangles
    m01, m12, m20 = (nv + tri_edges[:, k] for k in range(3))
    children = np.stack(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([m01, t[:, 1], m12]),
            np.column_stack([m20, m12, t[:, 2]]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    ).reshape(-1, 3)
    parent = np.repeat(np.arange(mesh.n_triangles), 4)
    return TriMesh(
        vertices,
        children,
        _boundary_flags(vertices, mesh.extents),
        mesh.extents,
        mesh.level + 1,
        parent_mesh=mesh,
        parent=parent,
    )


def barycentric_all(mesh: TriMesh, point) -> np.ndarray:
    """Barycentric coordinates of ``point`` with respect to every triangle."""
    p = np.asarray(point, dtype=float)
    c = mesh.corners
    two_a = 2.0 * mesh.signed_areas
    lam = np.empty((mesh.n_triangles, 3))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        a, b = c[:, j], c[:, k]
        lam[:, i] = ((a[:, 0] - p[0]) * (b[:, 1] - p[1]) - (a[:, 1] - p[1]) * (b[:, 0] - p[0])) / two_a
    return lam


def locate_point(mesh: TriMesh, point) -> PointLocation:
    """Find the lowest-index triangle containing ``point``.

    Barycentric coordinates down to ``-1e-12`` count as inside; the
    returned weights are clipped to [0, 1] and renormalized.
    """
    lam = barycentric_all(mesh, point)
    inside = np.flatnonzero((lam >= -LOCATE_TOL).all(axis=1))
    if inside.size == 0:
        raise PointOutsideDomain(f"point {tuple(np.asarray(point, float))} is not inside the mesh")
    k = int(inside[0])
    w = np.clip(lam[k], 0.0, 1.0)
    w /= w.sum()
    return PointLocation(k, tuple(float(v) for v in w))


def ancestor_map(fine: TriMesh, coarse: TriMesh) -> Optional[np.ndarray]:
    """Map each triangle of ``fine`` to its ancestor in ``coarse``, or None."""
    idx = np.arange(fine.n_triangles)
    m = fine
    while m is not coarse:
        if m.parent_mesh is None:
            return None
        idx = m.parent[idx]
        m = m.parent_mesh
    return idx

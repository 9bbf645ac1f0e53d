"""Discrete adjoint equation with a Dirac-measure right-hand side.

The adjoint ``p_h`` in V_h solves

    (grad w, grad p_h) + (a'(y) p_h, w) = sum_t (y_h(t) - y_t) w(t)

for all w in V_h. Each ``<delta_t, w>`` is the hat-function evaluation
``w(t)``, so the load is a sum of :func:`pointocp.fem.dirac_load` vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .errors import PointOutsideDomain
from .fem import P1Function
from .state import Nonlinearity, reduced_jacobian


@dataclass(frozen=True, eq=False)
class Observations:
    """Ordered observation points with one target value each."""

    points: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        tg = np.asarray(self.targets, dtype=float).ravel()
        if pts.shape[0] == 0:
            raise ValueError("at least one observation point is required")
        if pts.shape[0] != tg.size:
            raise ValueError(f"{pts.shape[0]} points but {tg.size} targets")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("observation points must be distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "targets", tg)

    def __len__(self):
        return self.targets.size

    def check_inside(self, extents):
        x0, x1, y0, y1 = extents
        for p in self.points:
            if not (x0 < p[0] < x1 and y0 < p[1] < y1):
                raise PointOutsideDomain(f"observation point {tuple(p)} is not strictly inside the domain")

    def with_targets(self, targets):
        return Observations(self.points, targets)


def misfits(y: P1Function, obs: Observations) -> np.ndarray:
    """Residuals ``y(t) - y_t`` at every observation point."""
    return np.array([fem.point_eval(y, t) for t in obs.points]) - obs.targets


def adjoint_load(mesh, weights, obs: Observations) -> np.ndarray:
    b = np.zeros(mesh.n_vertices)
    for t, w in zip(obs.points, weights):
        b += fem.dirac_load(mesh, t, w)
    return b


def solve_adjoint_frozen(
    mesh,
    nl: Nonlinearity,
    y_freeze: P1Function,
    obs: Observations,
    rhs_state: P1Function,
    degree: int = fem.ASSEMBLY_DEGREE,
) -> P1Function:
    """Adjoint with reaction taken from ``y_freeze`` and misfits from ``rhs_state``."""
    obs.check_inside(mesh.extents)
    b = adjoint_load(mesh, misfits(rhs_state, obs), obs)[mesh.interior]
    p = np.zeros(mesh.n_vertices)
    if np.any(b):
        p[mesh.interior] = fem.solve_spd(reduced_jacobian(mesh, nl, y_freeze, degree), b)
    return P1Function(mesh, p)


def solve_adjoint(mesh, nl: Nonlinearity, y_h: P1Function, obs: Observations, degree: int = fem.ASSEMBLY_DEGREE) -> P1Function:
    return solve_adjoint_frozen(mesh, nl, y_h, obs, y_h, degree)

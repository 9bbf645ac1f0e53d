"""Quadrature rules on the reference triangle.

Rules are stored in barycentric form with weights normalized to sum to
one; multiply by the triangle area when integrating.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) barycentric
    weights: np.ndarray  # (nq,), sum 1
    degree: int

    @property
    def n_points(self) -> int:
        return self.weights.size


def _dunavant4():
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts, wts = [], []
    for c, w in ((a, wa), (b, wb)):
        o = 1.0 - 2.0 * c
        pts += [(o, c, c), (c, o, c), (c, c, o)]
        wts += [w] * 3
    return np.array(pts), np.array(wts)


def _conical_product(degree: int):
    """Collapsed Gauss-Jacobi x Gauss-Legendre rule, exact to ``degree``.

    All weights are positive and all points interior.
    """
    m = max(1, ceil((degree + 1) / 2))
    # s-direction carries the (1 - s) Jacobian of the Duffy collapse
    xs, ws = roots_jacobi(m, 1.0, 0.0)
    xt, wt = roots_legendre(m)
    s = 0.5 * (xs + 1.0)
    t = 0.5 * (xt + 1.0)
    ws = ws / 4.0
    wt = wt / 2.0
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    x = S
    y = (1.0 - S) * T
    pts = np.column_stack([1.0 - x.ravel() - y.ravel(), x.ravel(), y.ravel()])
    w = W.ravel()
    return pts, w / w.sum()


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Positive-weight rule integrating polynomials of total degree <= ``degree``."""
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    if degree <= 1:
        pts, w = np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    elif degree == 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1 / 3)
    elif degree <= 4:
        pts, w = _dunavant4()
        degree = 4
    else:
        pts, w = _conical_product(degree)
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, max(degree, 1))

"""Discrete semilinear state equation and its linearization.

Find ``y_h`` in V_h with

    (grad y_h, grad v) + (a(y_h), v) = (u, v)    for all v in V_h,

where the reaction integral is evaluated with the assembly quadrature
rule at quadrature points (``a`` is never interpolated into V_h), so the
Newton Jacobian is the exact derivative of the discrete residual.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import fem
from .errors import NewtonDivergence
from .fem import P0Function, P1Function
from .mesh import TriMesh
from .quadrature import triangle_rule


@dataclass(frozen=True)
class Nonlinearity:
    """Spatially homogeneous reaction term a(y) with two y-derivatives."""

    name: str
    param: float
    value: Callable = field(repr=False, compare=False)
    dy: Callable = field(repr=False, compare=False)
    dyy: Callable = field(repr=False, compare=False)

    @property
    def id(self) -> str:
        return self.name if self.name == "zero" else f"{self.name}({self.param:g})"

    @property
    def is_linear(self) -> bool:
        return self.name in ("zero", "linear")


def _zero(c):
    z = lambda y: np.zeros_like(y)  # noqa: E731
    return z, z, z


def _linear(c):
    return (lambda y: c * y), (lambda y: np.full_like(y, c)), (lambda y: np.zeros_like(y))


def _cubic(c):
    return (lambda y: c * y**3), (lambda y: 3 * c * y**2), (lambda y: 6 * c * y)


def _expy(c):
    # shifted so that a(0) = 0
    return (lambda y: c * np.expm1(y)), (lambda y: c * np.exp(y)), (lambda y: c * np.exp(y))


_REGISTRY = {
    "zero": (_zero, None),
    "linear": (_linear, lambda c: c >= 0),
    "cubic": (_cubic, lambda c: c > 0),
    "expy": (_expy, lambda c: c > 0),
}

_ID_RE = re.compile(r"^\s*([a-z]+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*$")


def make_nonlinearity(name: str, param: float = 1.0) -> Nonlinearity:
    if name not in _REGISTRY:
        raise ValueError(f"unknown nonlinearity {name!r}; choose from {sorted(_REGISTRY)}")
    factory, valid = _REGISTRY[name]
    param = float(param)
    if valid is not None and not valid(param):
        raise ValueError(f"invalid parameter {param:g} for nonlinearity {name!r} (monotonicity requires c >= 0)")
    if name == "zero":
        param = 0.0
    return Nonlinearity(name, param, *factory(param))


def parse_nonlinearity(spec) -> Nonlinearity:
    """Build a registry nonlinearity from an id such as ``"cubic(1)"``."""
    if isinstance(spec, Nonlinearity):
        return spec
    m = _ID_RE.match(str(spec))
    if not m:
        raise ValueError(f"malformed nonlinearity id {spec!r}")
    name, param = m.group(1), m.group(2)
    return make_nonlinearity(name, 1.0 if param is None else float(param))


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False


# --- residual and Jacobian -----------------------------------------------------

@lru_cache(maxsize=16)
def _reduced_stiffness(mesh: TriMesh):
    K = fem.assemble_stiffness(mesh)
    return K, fem.dirichlet_reduce(K, mesh)


def _as_load(mesh: TriMesh, u, degree: int) -> np.ndarray:
    """Full-length load vector for a control, explicit vector or source callable."""
    if isinstance(u, P1Function):
        raise TypeError("loads are given as P0 controls, callables, or vertex vectors")
    if isinstance(u, P0Function) or callable(u):
        return fem.assemble_load(mesh, u, degree)
    b = np.asarray(u, dtype=float)
    if b.ndim == 0:
        return fem.assemble_load(mesh, float(b), degree)
    if b.shape != (mesh.n_vertices,):
        raise ValueError(f"load vector must have length {mesh.n_vertices}")
    return b


def _reaction_load(mesh, nl, y: np.ndarray, degree) -> np.ndarray:
    rule = triangle_rule(degree)
    yq = y[mesh.triangles] @ rule.points.T
    return fem.assemble_load(mesh, nl.value(yq), degree)


def reduced_jacobian(mesh: TriMesh, nl: Nonlinearity, y, degree: int = fem.ASSEMBLY_DEGREE):
    """Interior block of A + M[a'(y)]; doubles as the adjoint system matrix."""
    coeffs = y.coefficients if isinstance(y, P1Function) else np.asarray(y, float)
    _, Kr = _reduced_stiffness(mesh)
    if nl.name == "zero":
        return Kr
    rule = triangle_rule(degree)
    yq = coeffs[mesh.triangles] @ rule.points.T
    return Kr + fem.dirichlet_reduce(fem.assemble_mass(mesh, nl.dy(yq), degree), mesh)


def state_residual(mesh: TriMesh, nl: Nonlinearity, y, u, degree: int = fem.ASSEMBLY_DEGREE) -> np.ndarray:
    """Interior residual A y + M[a(y)] - b of the discrete state equation."""
    coeffs = y.coefficients if isinstance(y, P1Function) else np.asarray(y, float)
    K, _ = _reduced_stiffness(mesh)
    r = K @ coeffs + _reaction_load(mesh, nl, coeffs, degree) - _as_load(mesh, u, degree)
    return r[mesh.interior]


def solve_state(
    mesh: TriMesh,
    nl: Nonlinearity,
    u,
    newton_tol: float = 1e-11,
    max_iter: int = 25,
    degree: int = fem.ASSEMBLY_DEGREE,
    initial=None,
    max_halvings: int = 30,
):
    """Solve the state equation by damped Newton; returns ``(y_h, NewtonReport)``.

    The default initial guess is one Newton step from ``y = 0``, which is
    counted as the first iteration. Convergence is declared once the
    Euclidean norm of the interior residual is at most ``newton_tol``.
    """
    if newton_tol <= 0:
        raise ValueError("newton_tol must be positive")
    b = _as_load(mesh, u, degree)
    idx = mesh.interior
    y = np.zeros(mesh.n_vertices)
    report = NewtonReport()

    def residual(c):
        return state_residual(mesh, nl, c, b, degree)

    r = residual(y)
    report.residual_history.append(float(np.linalg.norm(r)))
    if initial is not None:
        y = np.array(initial.coefficients if isinstance(initial, P1Function) else initial, dtype=float)
        y[mesh.boundary_vertex] = 0.0
    else:
        y[idx] = fem.solve_spd(reduced_jacobian(mesh, nl, y, degree), -r)
        report.iterations = 1
    r = residual(y)
    rnorm = float(np.linalg.norm(r))
    report.residual_history.append(rnorm)

    while rnorm > newton_tol:
        if report.iterations >= max_iter:
            raise NewtonDivergence(
                f"Newton did not converge in {max_iter} iterations (residual {rnorm:.3e})", report
            )
        step = fem.solve_spd(reduced_jacobian(mesh, nl, y, degree), -r)
        report.iterations += 1
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = y.copy()
            trial[idx] += t * step
            r_trial = residual(trial)
            n_trial = float(np.linalg.norm(r_trial))
            if n_trial < rnorm:
                break
            t *= 0.5
        else:
            raise NewtonDivergence(
                f"Newton step halving exhausted at residual {rnorm:.3e}", report
            )
        y, r, rnorm = trial, r_trial, n_trial
        report.residual_history.append(rnorm)

    report.converged = True
    return P1Function(mesh, y), report


def solve_linearized(mesh: TriMesh, nl: Nonlinearity, y: P1Function, rhs, degree: int = fem.ASSEMBLY_DEGREE) -> P1Function:
    """Solve (grad z, grad w) + (a'(y) z, w) = (v, w) for the linearized state."""
    b = _as_load(mesh, rhs, degree)[mesh.interior]
    z = np.zeros(mesh.n_vertices)
    z[mesh.interior] = fem.solve_spd(reduced_jacobian(mesh, nl, y, degree), b)
    return P1Function(mesh, z)

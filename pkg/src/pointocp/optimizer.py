"""Reduced functional, first/second derivatives and the control iteration.

The discrete problem minimizes

    j_h(u) = 1/2 sum_t (y_h(t) - y_t)^2 + alpha/2 ||u||^2

over piecewise constant controls with ``lower <= u <= upper``. Its
stationary points are characterized cellwise by

    u|_T = clip(-avg_T(p_h) / alpha, lower, upper),

and :func:`solve_ocp` iterates that map with active-set bookkeeping.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import fem
from .adjoint import Observations, misfits, solve_adjoint
from .errors import OuterDivergence
from .fem import P0Function, P1Function
from .mesh import TriMesh
from .state import Nonlinearity, parse_nonlinearity, solve_linearized, solve_state
from .quadrature import triangle_rule

log = logging.getLogger(__name__)


class ControlOutOfBounds(UserWarning):
    pass


@dataclass(frozen=True)
class ControlProblem:
    alpha: float
    lower: float
    upper: float
    obs: Observations
    nl: Nonlinearity = "cubic(1)"
    extents: tuple = (0.0, 1.0, 0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "nl", parse_nonlinearity(self.nl))
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.lower < self.upper:
            raise ValueError(f"control bounds must satisfy lower < upper, got [{self.lower}, {self.upper}]")
        self.obs.check_inside(self.extents)

    def clip(self, values):
        return np.clip(values, self.lower, self.upper)


@dataclass(frozen=True)
class SolverOptions:
    newton_tol: float = 1e-11
    max_newton: int = 25
    outer_tol: float = 1e-10
    max_outer: int = 200
    damping: float = 1.0
    vi_tol: float = 1e-9
    degree: int = fem.ASSEMBLY_DEGREE
    error_degree: int = fem.ERROR_DEGREE
    # consecutive non-decreasing control changes before damping drops to 1/2
    fallback_after: int = 3

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.newton_tol <= 0 or self.outer_tol <= 0:
            raise ValueError("tolerances must be positive")


DEFAULT_OPTIONS = SolverOptions()


@dataclass
class OptimizerReport:
    outer_iterations: int = 0
    vi_residual: float = float("inf")
    control_change_history: list = field(default_factory=list)
    # (cells at lower bound, cells at upper bound, inactive cells) per iteration
    active_set_sizes: list = field(default_factory=list)
    damping_history: list = field(default_factory=list)
    cost_history: list = field(default_factory=list)
    converged: bool = False
    initial_guess: str = "0"


@dataclass
class OcpSolution:
    control: P0Function
    state: P1Function
    adjoint: P1Function
    cost: float
    report: OptimizerReport


def _state(problem, mesh, u, opts):
    y, _ = solve_state(mesh, problem.nl, u, opts.newton_tol, opts.max_newton, opts.degree)
    return y


def _values(u):
    return u.cell_values if isinstance(u, P0Function) else np.asarray(u, dtype=float)


def _cost(problem, mesh, u_vals, y):
    r = misfits(y, problem.obs)
    return 0.5 * float(r @ r) + 0.5 * problem.alpha * float(mesh.areas @ u_vals**2)


def _warn_bounds(problem, u_vals):
    if u_vals.min() < problem.lower or u_vals.max() > problem.upper:
        warnings.warn("control violates the box constraints", ControlOutOfBounds, stacklevel=3)


def reduced_cost(problem: ControlProblem, mesh: TriMesh, u: P0Function, opts: SolverOptions = DEFAULT_OPTIONS) -> float:
    """Evaluate j_h(u); out-of-bounds controls only trigger a warning."""
    uv = _values(u)
    _warn_bounds(problem, uv)
    return _cost(problem, mesh, uv, _state(problem, mesh, P0Function(mesh, uv), opts))


def reduced_gradient(problem: ControlProblem, mesh: TriMesh, u: P0Function, opts: SolverOptions = DEFAULT_OPTIONS):
    """L2 representative of j_h'(u) in the P0 space, with the state and adjoint used.

    On each cell the gradient is ``alpha * u_T + avg_T(p_h)``.
    """
    uv = _values(u)
    _warn_bounds(problem, uv)
    y = _state(problem, mesh, P0Function(mesh, uv), opts)
    p = solve_adjoint(mesh, problem.nl, y, problem.obs, opts.degree)
    g = problem.alpha * uv + fem.cell_average(p)
    return P0Function(mesh, g), y, p


def projection_update(problem: ControlProblem, mesh: TriMesh, adjoint: P1Function) -> P0Function:
    return P0Function(mesh, problem.clip(-fem.cell_average(adjoint) / problem.alpha))


def vi_residual(problem: ControlProblem, mesh: TriMesh, u, adjoint: P1Function) -> float:
    """Projected-gradient residual ``||u - clip(u - g)||_L2``; zero iff stationary."""
    uv = _values(u)
    g = problem.alpha * uv + fem.cell_average(adjoint)
    d = uv - problem.clip(uv - g)
    return float(np.sqrt(mesh.areas @ d**2))


def projection_residual(problem: ControlProblem, mesh: TriMesh, u, adjoint: P1Function) -> float:
    """Max over cells of ``|u_T - clip(-avg_T(p) / alpha)|``."""
    return float(np.abs(_values(u) - projection_update(problem, mesh, adjoint).cell_values).max())


def active_sets(problem: ControlProblem, candidate: np.ndarray) -> tuple:
    lower = int(np.count_nonzero(candidate <= problem.lower))
    upper = int(np.count_nonzero(candidate >= problem.upper))
    return lower, upper, candidate.size - lower - upper


def _initial_control(problem, mesh, u0):
    if u0 is None:
        return problem.clip(np.zeros(mesh.n_triangles)), "0"
    if isinstance(u0, str):
        if u0 not in ("lower", "upper"):
            raise ValueError(f"unknown initial control {u0!r}")
        return np.full(mesh.n_triangles, getattr(problem, u0)), u0
    if np.ndim(u0) == 0:
        return problem.clip(np.full(mesh.n_triangles, float(u0))), repr(float(u0))
    return problem.clip(_values(u0).astype(float)), "custom"


def solve_ocp(
    problem: ControlProblem,
    mesh: TriMesh,
    opts: SolverOptions = DEFAULT_OPTIONS,
    u0=None,
    *,
    callback=None,
    raise_on_failure: bool = True,
) -> OcpSolution:
    """Damped projected fixed-point iteration with explicit active sets.

    Each step sets ``u <- (1 - theta) u + theta * clip(-avg(p(u)) / alpha)``.
    The iteration stops at the current iterate once the step would move
    the control by at most ``outer_tol`` in L2, the VI residual is at most
    ``vi_tol`` and the projection formula holds cellwise to ``vi_tol``.

    ``u0`` may be None (zero, clipped), ``"lower"``, ``"upper"``, a scalar
    or a P0 control.
    """
    u, label = _initial_control(problem, mesh, u0)
    report = OptimizerReport(initial_guess=label)
    theta = opts.damping
    stalls = 0
    for k in range(opts.max_outer):
        U = P0Function(mesh, u)
        y = _state(problem, mesh, U, opts)
        p = solve_adjoint(mesh, problem.nl, y, problem.obs, opts.degree)
        candidate = -fem.cell_average(p) / problem.alpha
        report.active_set_sizes.append(active_sets(problem, candidate))
        projected = problem.clip(candidate)
        vi = vi_residual(problem, mesh, u, p)
        step = theta * (projected - u)
        change = float(np.sqrt(mesh.areas @ step**2))
        cost = _cost(problem, mesh, u, y)
        report.outer_iterations = k + 1
        report.vi_residual = vi
        report.cost_history.append(cost)
        report.damping_history.append(theta)
        report.control_change_history.append(change)
        log.info(
            "outer %3d  cost %.12g  change %.3e  vi %.3e  active(lower, upper, inactive)=%s",
            k + 1, cost, change, vi, report.active_set_sizes[-1],
        )
        if callback is not None:
            callback(k, U, y, p, report)
        if change <= opts.outer_tol and vi <= opts.vi_tol and np.abs(projected - u).max() <= opts.vi_tol:
            report.converged = True
            return OcpSolution(U, y, p, cost, report)
        hist = report.control_change_history
        stalls = stalls + 1 if len(hist) > 1 and hist[-1] >= hist[-2] else 0
        if stalls >= opts.fallback_after and theta > 0.5:
            theta = 0.5
            stalls = 0
            log.info("control change stagnates; damping reduced to 1/2")
        u = projected if theta == 1.0 else problem.clip((1.0 - theta) * u + theta * projected)

    sol = OcpSolution(U, y, p, cost, report)
    if raise_on_failure:
        raise OuterDivergence(
            f"no convergence in {opts.max_outer} outer iterations "
            f"(last change {report.control_change_history[-1]:.3e}, vi {report.vi_residual:.3e})",
            sol,
        )
    return sol


# --- second order --------------------------------------------------------------

class Linearization:
    """State, adjoint and linearized solves at a fixed control.

    Reusing one instance across many Hessian evaluations avoids
    re-solving the state and adjoint equations.
    """

    def __init__(self, problem: ControlProblem, mesh: TriMesh, u, opts: SolverOptions = DEFAULT_OPTIONS):
        self.problem, self.mesh, self.opts = problem, mesh, opts
        self.u = P0Function(mesh, _values(u))
        self.state = _state(problem, mesh, self.u, opts)
        self.adjoint = solve_adjoint(mesh, problem.nl, self.state, problem.obs, opts.degree)
        self.cost = _cost(problem, mesh, self.u.cell_values, self.state)

    def gradient(self) -> P0Function:
        return P0Function(self.mesh, self.problem.alpha * self.u.cell_values + fem.cell_average(self.adjoint))

    def direction_state(self, v) -> P1Function:
        return solve_linearized(self.mesh, self.problem.nl, self.state, P0Function(self.mesh, _values(v)), self.opts.degree)

    def hessian(self, v1, v2, z1: Optional[P1Function] = None, z2: Optional[P1Function] = None) -> float:
        """j_h''(u)(v1, v2) = alpha (v1, v2) - (a''(y) z1 z2, p) + sum_t z1(t) z2(t)."""
        mesh, problem = self.mesh, self.problem
        a, b = _values(v1), _values(v2)
        z1 = self.direction_state(a) if z1 is None else z1
        z2 = self.direction_state(b) if z2 is None else z2
        value = problem.alpha * float(mesh.areas @ (a * b))
        if not problem.nl.is_linear:
            rule = triangle_rule(self.opts.degree)
            tri = mesh.triangles
            yq = self.state.coefficients[tri] @ rule.points.T
            z1q = z1.coefficients[tri] @ rule.points.T
            z2q = z2.coefficients[tri] @ rule.points.T
            pq = self.adjoint.coefficients[tri] @ rule.points.T
            integrand = problem.nl.dyy(yq) * z1q * z2q * pq
            value -= float(mesh.areas @ (integrand @ rule.weights))
        zt1 = np.array([fem.point_eval(z1, t) for t in problem.obs.points])
        zt2 = np.array([fem.point_eval(z2, t) for t in problem.obs.points])
        value += float(zt1 @ zt2)
        return value


def hessian_apply(problem: ControlProblem, mesh: TriMesh, u, v1, v2, opts: SolverOptions = DEFAULT_OPTIONS) -> float:
    return Linearization(problem, mesh, u, opts).hessian(v1, v2)


def with_options(opts: SolverOptions, **changes) -> SolverOptions:
    return replace(opts, **changes)

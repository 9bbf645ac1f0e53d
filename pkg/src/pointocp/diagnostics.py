"""Derivative and stationarity checks for a solved discrete control problem."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .fem import P0Function
from .optimizer import (
    ControlOutOfBounds,
    ControlProblem,
    Linearization,
    OcpSolution,
    SolverOptions,
    projection_residual,
    reduced_cost,
    vi_residual,
)

GRAD_EPS = 1e-5
HESS_EPS = 1e-4
FD_NEWTON_TOL = 1e-13


@dataclass
class DiagnosticResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{mark}] {self.name:<24} {self.value:.3e}  (limit {self.threshold:.1e}){extra}"


def _rel(a, b, floor):
    return abs(a - b) / max(abs(a), abs(b), floor)


def _fd_options(opts: SolverOptions) -> SolverOptions:
    return replace(opts, newton_tol=min(opts.newton_tol, FD_NEWTON_TOL))


def random_direction(mesh, rng, mask=None) -> np.ndarray:
    v = rng.standard_normal(mesh.n_triangles)
    if mask is not None:
        v = np.where(mask, v, 0.0)
    return v


def random_admissible(problem: ControlProblem, mesh, rng) -> np.ndarray:
    return rng.uniform(problem.lower, problem.upper, mesh.n_triangles)


def _cost_quiet(problem, mesh, u, opts):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ControlOutOfBounds)
        return reduced_cost(problem, mesh, P0Function(mesh, u), opts)


def gradient_errors(problem, mesh, u, opts, rng, n_dirs=5, eps=GRAD_EPS) -> list:
    """Relative gaps between central differences and (g, v)_L2."""
    opts = _fd_options(opts)
    lin = Linearization(problem, mesh, u, opts)
    g = lin.gradient().cell_values
    uv = lin.u.cell_values
    out = []
    for _ in range(n_dirs):
        v = random_direction(mesh, rng)
        exact = float(mesh.areas @ (g * v))
        fd = (_cost_quiet(problem, mesh, uv + eps * v, opts) - _cost_quiet(problem, mesh, uv - eps * v, opts)) / (2 * eps)
        out.append(_rel(fd, exact, 1e-12))
    return out


def hessian_fd_errors(problem, mesh, u, opts, rng, n_dirs=5, eps=HESS_EPS) -> list:
    opts = _fd_options(opts)
    lin = Linearization(problem, mesh, u, opts)
    uv = lin.u.cell_values
    out = []
    for _ in range(n_dirs):
        v = random_direction(mesh, rng)
        exact = lin.hessian(v, v)
        fd = (_cost_quiet(problem, mesh, uv + eps * v, opts) - 2 * lin.cost + _cost_quiet(problem, mesh, uv - eps * v, opts)) / eps**2
        out.append(_rel(fd, exact, 1e-12))
    return out


def hessian_asymmetry(problem, mesh, u, opts, rng, n_pairs=10) -> list:
    lin = Linearization(problem, mesh, u, opts)
    out = []
    for _ in range(n_pairs):
        v1, v2 = random_direction(mesh, rng), random_direction(mesh, rng)
        z1, z2 = lin.direction_state(v1), lin.direction_state(v2)
        h12 = lin.hessian(v1, v2, z1, z2)
        h21 = lin.hessian(v2, v1, z2, z1)
        out.append(_rel(h12, h21, 1e-300))
    return out


def inactive_mask(problem: ControlProblem, u: np.ndarray) -> np.ndarray:
    return (u > problem.lower) & (u < problem.upper)


def hessian_inactive_values(problem, mesh, u, opts, rng, n_dirs=20) -> list:
    """j''(u)(v, v) for random directions supported on the inactive cells."""
    lin = Linearization(problem, mesh, u, opts)
    mask = inactive_mask(problem, lin.u.cell_values)
    if not mask.any():
        return []
    return [lin.hessian(v, v) for v in (random_direction(mesh, rng, mask) for _ in range(n_dirs))]


def run_diagnostics(
    problem: ControlProblem,
    mesh,
    solution: OcpSolution,
    opts: SolverOptions,
    seed: int = 0,
    grad_eps: float = GRAD_EPS,
    hess_eps: float = HESS_EPS,
) -> list:
    """Full diagnostic suite at a solved control; one result per check."""
    rng = np.random.default_rng(seed)
    u = solution.control.cell_values
    results = []

    # the gradient nearly vanishes at a stationary point, so probe a random admissible control
    probe = random_admissible(problem, mesh, rng)
    ge = gradient_errors(problem, mesh, probe, opts, rng, eps=grad_eps)
    results.append(DiagnosticResult("gradient FD", max(ge), 1e-5, max(ge) <= 1e-5,
                                    f"{len(ge)} directions at a random admissible control, eps={grad_eps:g}"))

    asym = hessian_asymmetry(problem, mesh, u, opts, rng)
    results.append(DiagnosticResult("hessian symmetry", max(asym), 1e-12, max(asym) <= 1e-12, f"{len(asym)} pairs"))

    he = hessian_fd_errors(problem, mesh, u, opts, rng, eps=hess_eps)
    results.append(DiagnosticResult("hessian FD", max(he), 1e-3, max(he) <= 1e-3, f"{len(he)} directions, eps={hess_eps:g}"))

    proj = projection_residual(problem, mesh, u, solution.adjoint)
    results.append(DiagnosticResult("projection formula", proj, 1e-9, proj <= 1e-9, "max over cells"))

    vi = vi_residual(problem, mesh, u, solution.adjoint)
    results.append(DiagnosticResult("VI residual", vi, 1e-9, vi <= 1e-9, "L2"))

    hv = hessian_inactive_values(problem, mesh, u, opts, rng)
    if hv:
        lo = min(hv)
        results.append(DiagnosticResult("hessian positivity", lo, 0.0, lo > 0, f"min over {len(hv)} inactive-cell directions"))
    else:
        results.append(DiagnosticResult("hessian positivity", 0.0, 0.0, True, "no inactive cells; skipped"))
    return results

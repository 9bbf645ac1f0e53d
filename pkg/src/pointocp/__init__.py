"""Pointwise tracking optimal control of semilinear elliptic equations.

State and adjoint are continuous piecewise linear, the control is
piecewise constant with box constraints, and observation points enter the
adjoint equation as Dirac loads.
"""

from .adjoint import Observations, solve_adjoint, solve_adjoint_frozen
from .fem import P0Function, P1Function
from .mesh import TriMesh, locate_point, rectangle_mesh, uniform_refine, unit_square_mesh
from .optimizer import (
    ControlProblem,
    OcpSolution,
    SolverOptions,
    hessian_apply,
    projection_update,
    reduced_cost,
    reduced_gradient,
    solve_ocp,
    vi_residual,
)
from .state import Nonlinearity, parse_nonlinearity, solve_linearized, solve_state
from .study import EocTable, compute_eoc, emit_csv, emit_plot, inject_p0, run_study

__version__ = "0.1.0"

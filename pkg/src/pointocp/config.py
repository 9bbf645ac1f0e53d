"""Run configuration files.

Configs are TOML documents with up to five flat tables::

    [problem]
    alpha = 0.1
    lower = -10.0
    upper = 10.0
    nonlinearity = "cubic(1)"        # zero | linear(c) | cubic(c) | expy(c)
    domain = [0.0, 1.0, 0.0, 1.0]    # x0, x1, y0, y1
    points = [[0.25, 0.25], [0.75, 0.75]]
    targets = [3.0, 3.0]

    [mesh]
    n = 16                           # used by solve and check
    levels = [4, 8, 16, 32, 64]      # used by study
    reference_level = 256

    [solver]
    newton_tol = 1e-11
    max_newton = 25
    outer_tol = 1e-10
    max_outer = 200
    damping = 1.0
    vi_tol = 1e-9
    quadrature_degree = 4
    error_quadrature_degree = 7
    initial_control = "0"            # "0" | "lower" | "upper" | number
    multistart = []                  # extra initial controls for solve

    [check]
    gradient_eps = 1e-5              # finite-difference steps for diagnostics
    hessian_eps = 1e-4

    [output]
    csv = "study.csv"
    svg = "study.svg"
    verbosity = 0

Only ``problem.alpha``, ``problem.lower``, ``problem.upper``,
``problem.points`` and ``problem.targets`` are required. Unknown tables
or keys are rejected.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .adjoint import Observations
from .diagnostics import GRAD_EPS, HESS_EPS
from .errors import ConfigError
from .optimizer import ControlProblem, SolverOptions
from .state import parse_nonlinearity


@dataclass(frozen=True)
class MeshConfig:
    n: Optional[int] = None
    levels: tuple = ()
    reference_level: Optional[int] = None


@dataclass(frozen=True)
class OutputConfig:
    csv: Optional[str] = None
    svg: Optional[str] = None
    verbosity: int = 0


@dataclass(frozen=True)
class CheckConfig:
    gradient_eps: float = GRAD_EPS
    hessian_eps: float = HESS_EPS


@dataclass(frozen=True)
class RunConfig:
    problem: ControlProblem
    mesh: MeshConfig = field(default_factory=MeshConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: OutputConfig = field(default_factory=OutputConfig)
    check: CheckConfig = field(default_factory=CheckConfig)
    initial_control: object = None
    multistart: tuple = ()


_KEYS = {
    "problem": {"alpha", "lower", "upper", "nonlinearity", "domain", "points", "targets"},
    "mesh": {"n", "levels", "reference_level"},
    "solver": {
        "newton_tol", "max_newton", "outer_tol", "max_outer", "damping", "vi_tol",
        "quadrature_degree", "error_quadrature_degree", "initial_control", "multistart",
    },
    "check": {"gradient_eps", "hessian_eps"},
    "output": {"csv", "svg", "verbosity"},
}
_REQUIRED = ("alpha", "lower", "upper", "points", "targets")


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _initial(value, where, errors):
    if value is None:
        return None
    if _is_num(value):
        return float(value)
    if value in ("0", "lower", "upper"):
        return None if value == "0" else value
    errors.append(f"{where}: expected \"0\", \"lower\", \"upper\" or a number, got {value!r}")
    return None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None

    errors = []
    for table, body in doc.items():
        if table not in _KEYS:
            errors.append(f"unknown table [{table}]")
            continue
        if not isinstance(body, dict):
            errors.append(f"{table} must be a table")
            continue
        for key in body:
            if key not in _KEYS[table]:
                errors.append(f"unknown key {table}.{key}")
    pr = doc.get("problem", {}) if isinstance(doc.get("problem"), dict) else {}
    ms = doc.get("mesh", {}) if isinstance(doc.get("mesh"), dict) else {}
    so = doc.get("solver", {}) if isinstance(doc.get("solver"), dict) else {}
    out = doc.get("output", {}) if isinstance(doc.get("output"), dict) else {}
    ck = doc.get("check", {}) if isinstance(doc.get("check"), dict) else {}

    for key in _REQUIRED:
        if key not in pr:
            errors.append(f"missing required key problem.{key}")

    alpha, lower, upper = pr.get("alpha"), pr.get("lower"), pr.get("upper")
    for key, val in (("alpha", alpha), ("lower", lower), ("upper", upper)):
        if val is not None and not _is_num(val):
            errors.append(f"problem.{key} must be a finite number")
    if _is_num(alpha) and alpha <= 0:
        errors.append("problem.alpha must be > 0")
    if _is_num(lower) and _is_num(upper) and not lower < upper:
        errors.append("problem.lower must be < problem.upper (box constraints need a < b)")

    nl = None
    try:
        nl = parse_nonlinearity(pr.get("nonlinearity", "cubic(1)"))
    except ValueError as exc:
        errors.append(f"problem.nonlinearity: {exc}")

    domain = pr.get("domain", [0.0, 1.0, 0.0, 1.0])
    if not (isinstance(domain, list) and len(domain) == 4 and all(_is_num(d) for d in domain)
            and domain[0] < domain[1] and domain[2] < domain[3]):
        errors.append("problem.domain must be [x0, x1, y0, y1] with x0 < x1 and y0 < y1")
        domain = None

    points, targets = pr.get("points"), pr.get("targets")
    pts_ok = isinstance(points, list) and len(points) > 0 and all(
        isinstance(p, list) and len(p) == 2 and all(_is_num(c) for c in p) for p in points
    )
    if points is not None and not pts_ok:
        errors.append("problem.points must be a nonempty list of [x, y] pairs")
    tg_ok = isinstance(targets, list) and all(_is_num(t) for t in targets)
    if targets is not None and not tg_ok:
        errors.append("problem.targets must be a list of numbers")
    if pts_ok and tg_ok:
        if len(points) != len(targets):
            errors.append(f"problem.points has {len(points)} entries but problem.targets has {len(targets)}")
        if len({tuple(p) for p in points}) != len(points):
            errors.append("problem.points must be distinct")
        if domain is not None:
            x0, x1, y0, y1 = domain
            for p in points:
                if not (x0 < p[0] < x1 and y0 < p[1] < y1):
                    errors.append(f"observation point {p} is not strictly inside the domain")

    n = ms.get("n")
    if n is not None and not (_is_int(n) and n >= 1):
        errors.append("mesh.n must be a positive integer")
    levels = ms.get("levels", [])
    if not (isinstance(levels, list) and all(_is_int(v) and v >= 1 for v in levels)):
        errors.append("mesh.levels must be a list of positive integers")
        levels = []
    ref = ms.get("reference_level")
    if ref is not None and not (_is_int(ref) and ref >= 1):
        errors.append("mesh.reference_level must be a positive integer")
        ref = None
    if levels:
        base = min(levels)
        for v in levels + ([ref] if ref else []):
            ratio = v // base
            if v % base or ratio & (ratio - 1):
                errors.append(f"mesh level {v} is not a power-of-two multiple of {base}")
        if ref is not None and ref < max(levels):
            errors.append("mesh.reference_level must be at least the finest study level")

    solver_kwargs = {}
    spec = {
        "newton_tol": ("newton_tol", "pos"), "outer_tol": ("outer_tol", "pos"), "vi_tol": ("vi_tol", "pos"),
        "max_newton": ("max_newton", "int"), "max_outer": ("max_outer", "int"),
        "damping": ("damping", "damp"), "quadrature_degree": ("degree", "int"),
        "error_quadrature_degree": ("error_degree", "int"),
    }
    for key, (attr, kind) in spec.items():
        if key not in so:
            continue
        val = so[key]
        if kind == "int" and not (_is_int(val) and val >= 1):
            errors.append(f"solver.{key} must be a positive integer")
        elif kind == "pos" and not (_is_num(val) and val > 0):
            errors.append(f"solver.{key} must be a positive number")
        elif kind == "damp" and not (_is_num(val) and 0 < val <= 1):
            errors.append("solver.damping must lie in (0, 1]")
        else:
            solver_kwargs[attr] = val
    initial = _initial(so.get("initial_control"), "solver.initial_control", errors)
    multi = so.get("multistart", [])
    if not isinstance(multi, list):
        errors.append("solver.multistart must be a list")
        multi = []
    multistart = tuple(_initial(m, "solver.multistart", errors) for m in multi)

    eps = {}
    for key in ("gradient_eps", "hessian_eps"):
        if key in ck:
            if _is_num(ck[key]) and 0 < ck[key] < 1:
                eps[key] = float(ck[key])
            else:
                errors.append(f"check.{key} must lie in (0, 1)")

    verbosity = out.get("verbosity", 0)
    if not (_is_int(verbosity) and verbosity >= 0):
        errors.append("output.verbosity must be a nonnegative integer")
        verbosity = 0
    for key in ("csv", "svg"):
        if key in out and not isinstance(out[key], str):
            errors.append(f"output.{key} must be a path string")

    if errors:
        raise ConfigError(errors)

    problem = ControlProblem(
        alpha=float(alpha), lower=float(lower), upper=float(upper),
        obs=Observations(points, targets), nl=nl, extents=tuple(domain),
    )
    return RunConfig(
        problem=problem,
        mesh=MeshConfig(n, tuple(levels), ref),
        solver=SolverOptions(**solver_kwargs),
        output=OutputConfig(out.get("csv"), out.get("svg"), verbosity),
        check=CheckConfig(**eps),
        initial_control=initial,
        multistart=multistart,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError([f"{path}: {p}" for p in exc.problems]) from None

"""Command line interface: ``pointocp {solve,study,check}``.

Exit codes: 0 success, 1 input or configuration error, 2 solver
non-convergence, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_config
from .diagnostics import run_diagnostics
from .errors import ConfigError, NewtonDivergence, OuterDivergence, PointOutsideDomain, SolverDivergence, TooFewPoints
from .mesh import rectangle_mesh
from .optimizer import solve_ocp
from .study import emit_csv, emit_plot, run_study

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_INTERNAL = 0, 1, 2, 3


def _err(msg):
    print(msg, file=sys.stderr)


def _mesh_n(cfg: RunConfig, n):
    n = cfg.mesh.n if n is None else n
    if n is None:
        raise ConfigError("no mesh resolution: pass --n or set mesh.n")
    if n < 1:
        raise ConfigError("--n must be a positive integer")
    return n


def _solve(cfg: RunConfig, n: int):
    mesh = rectangle_mesh(n, cfg.problem.extents)
    starts = [cfg.initial_control] + list(cfg.multistart)
    best, failure = None, None
    for u0 in starts:
        try:
            sol = solve_ocp(cfg.problem, mesh, cfg.solver, u0)
        except OuterDivergence as exc:
            failure = exc
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        raise failure
    return mesh, best


def _print_report(sol, verbosity, out=None):
    out = out or sys.stdout
    rep = sol.report
    if verbosity >= 1:
        print("iter  lower  upper  inactive  control_change", file=out)
        for k, (sizes, ch) in enumerate(zip(rep.active_set_sizes, rep.control_change_history), 1):
            print(f"{k:4d}  {sizes[0]:5d}  {sizes[1]:5d}  {sizes[2]:8d}  {ch:.3e}", file=out)
    lo, up, ina = rep.active_set_sizes[-1]
    print(f"cost             {sol.cost:.15g}", file=out)
    print(f"vi_residual      {rep.vi_residual:.3e}", file=out)
    print(f"outer_iterations {rep.outer_iterations}", file=out)
    print(f"active_sets      lower={lo} upper={up} inactive={ina}", file=out)
    print(f"initial_guess    {rep.initial_guess}", file=out)


def _check_writable(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK) or Path(path).is_dir():
        raise OSError(f"output path {path} is not writable")


def cmd_solve(cfg: RunConfig, n=None) -> int:
    n = _mesh_n(cfg, n)
    try:
        _, sol = _solve(cfg, n)
    except OuterDivergence as exc:
        _err(f"error: {exc}")
        if exc.solution is not None:
            _print_report(exc.solution, max(1, cfg.output.verbosity), out=sys.stderr)
        return EXIT_SOLVER
    _print_report(sol, cfg.output.verbosity)
    return EXIT_OK


def cmd_study(cfg: RunConfig, csv_path=None, svg_path=None) -> int:
    levels = list(cfg.mesh.levels)
    ref = cfg.mesh.reference_level
    if not levels or ref is None:
        raise ConfigError("study needs mesh.levels and mesh.reference_level")
    csv_path = csv_path or cfg.output.csv
    svg_path = svg_path or cfg.output.svg
    for path in (csv_path, svg_path):
        if path:
            _check_writable(path)
    table = run_study(cfg.problem, levels, ref, cfg.solver, cfg.initial_control)
    print("level  h            error_l2       eoc      outer")
    for k, rec in enumerate(table.records):
        eoc = table.eoc[k - 1] if k > 0 else float("nan")
        eoc_s = "" if eoc != eoc else f"{eoc:.4f}"
        flag = "" if rec.converged else "  (not converged)"
        print(f"{rec.level:5d}  {rec.h_max:.5e}  {rec.control_error_l2:.6e}  {eoc_s:>7}  {rec.outer_iterations:5d}{flag}")
    if table.eoc:
        print(f"mean EOC (last 3 pairs): {table.mean_eoc(3):.4f}")
    if csv_path:
        emit_csv(table, csv_path)
        print(f"wrote {csv_path}")
    if svg_path:
        try:
            emit_plot(table, svg_path)
            print(f"wrote {svg_path}")
        except TooFewPoints as exc:
            _err(f"warning: no plot written: {exc}")
    return EXIT_OK if all(r.converged for r in table.records) else EXIT_SOLVER


def cmd_check(cfg: RunConfig, n=None, seed: int = 0) -> int:
    n = _mesh_n(cfg, n)
    try:
        mesh, sol = _solve(cfg, n)
    except OuterDivergence as exc:
        _err(f"error: {exc}")
        return EXIT_SOLVER
    results = run_diagnostics(cfg.problem, mesh, sol, cfg.solver, seed=seed,
                              grad_eps=cfg.check.gradient_eps, hess_eps=cfg.check.hessian_eps)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pointocp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the discrete control problem on one mesh")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--max-outer", type=int, help="override solver.max_outer")

    p = sub.add_parser("study", help="run a nested-mesh convergence study")
    p.add_argument("--config", required=True)
    p.add_argument("--csv", help="override output.csv")
    p.add_argument("--svg", help="override output.svg")

    p = sub.add_parser("check", help="derivative and stationarity diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)

    for p in sub.choices.values():
        p.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        verbosity = max(cfg.output.verbosity, args.verbose)
        if verbosity != cfg.output.verbosity:
            cfg = replace(cfg, output=replace(cfg.output, verbosity=verbosity))
        if verbosity >= 2:
            logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
        if args.command == "solve":
            if args.max_outer is not None:
                cfg = replace(cfg, solver=replace(cfg.solver, max_outer=args.max_outer))
            return cmd_solve(cfg, args.n)
        if args.command == "study":
            return cmd_study(cfg, args.csv, args.svg)
        return cmd_check(cfg, args.n, args.seed)
    except (ConfigError, PointOutsideDomain, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    except OSError as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    except (NewtonDivergence, SolverDivergence, OuterDivergence) as exc:
        _err(f"error: {exc}")
        return EXIT_SOLVER
    except Exception as exc:  # noqa: BLE001
        _err(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

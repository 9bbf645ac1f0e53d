"""Nested-mesh convergence study of the optimal control; writes CSV and SVG.

    python3 scripts/run_control_study.py [--config configs/four_point_cubic.toml] [--outdir results]
"""

import argparse
import logging
import time
from pathlib import Path

from pointocp.config import load_config
from pointocp.study import emit_csv, emit_plot, run_study

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "four_point_cubic.toml")
    ap.add_argument("--outdir", default=ROOT / "results")
    ap.add_argument("--reference", type=int, help="override mesh.reference_level")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")

    cfg = load_config(args.config)
    ref = args.reference or cfg.mesh.reference_level
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    table = run_study(cfg.problem, cfg.mesh.levels, ref, cfg.solver, cfg.initial_control)
    print(f"levels {list(cfg.mesh.levels)}, reference n={ref}, {time.perf_counter() - t0:.1f} s")
    print(f"{'n':>5} {'h':>11} {'error':>12} {'eoc':>7} {'outer':>6}")
    for k, r in enumerate(table.records):
        eoc = f"{table.eoc[k - 1]:.4f}" if k else ""
        print(f"{r.level:5d} {r.h_max:11.4e} {r.control_error_l2:12.5e} {eoc:>7} {r.outer_iterations:6d}")
    print(f"mean EOC over the last three pairs: {table.mean_eoc(3):.4f}")

    emit_csv(table, out / "control_study.csv")
    emit_plot(table, out / "control_study.svg")
    print(f"wrote {out / 'control_study.csv'} and {out / 'control_study.svg'}")


if __name__ == "__main__":
    main()

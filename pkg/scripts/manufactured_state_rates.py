"""Convergence of the state solver on a manufactured cubic problem.

Exact solution y* = sin(pi x) sin(pi y) with source 2 pi^2 y* + (y*)^3.
Prints L2 and H1-seminorm errors and their rates for a sequence of meshes.
"""

import argparse

import numpy as np

from pointocp import fem
from pointocp.mesh import unit_square_mesh
from pointocp.state import parse_nonlinearity, solve_state
from pointocp.study import compute_eoc


def y_star(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def grad_y_star(x, y):
    return (np.pi * np.cos(np.pi * x) * np.sin(np.pi * y), np.pi * np.sin(np.pi * x) * np.cos(np.pi * y))


def source(x, y):
    s = y_star(x, y)
    return 2 * np.pi**2 * s + s**3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    ap.add_argument("--degree", type=int, default=7, help="assembly quadrature degree")
    args = ap.parse_args()

    nl = parse_nonlinearity("cubic(1)")
    hs, l2, h1 = [], [], []
    for n in args.levels:
        m = unit_square_mesh(n)
        y, rep = solve_state(m, nl, source, degree=args.degree)
        hs.append(m.h_max)
        l2.append(fem.norm(y, "l2", minus=y_star))
        h1.append(fem.norm(y, "h1", minus=grad_y_star))
        print(f"n={n:4d}  newton={rep.iterations}  L2={l2[-1]:.4e}  H1={h1[-1]:.4e}")
    for (a, b), r2, r1 in zip(zip(args.levels, args.levels[1:]), compute_eoc(l2, hs), compute_eoc(h1, hs)):
        print(f"{a:4d} -> {b:4d}   L2 rate {r2:.4f}   H1 rate {r1:.4f}")


if __name__ == "__main__":
    main()

"""Convergence studies of the discrete optimal control on nested meshes.

Every study level is a uniform refinement descendant of the coarsest
level, and so is the reference mesh. Controls are piecewise constant, so
injecting a coarse control onto the reference mesh is exact; the L2 error
is then a plain weighted sum over reference cells.
"""

from __future__ import annotations

import csv
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NotNested, OuterDivergence, TooFewPoints
from .fem import P0Function
from .mesh import TriMesh, ancestor_map, rectangle_mesh, uniform_refine
from .optimizer import DEFAULT_OPTIONS, ControlProblem, SolverOptions, solve_ocp

log = logging.getLogger(__name__)

CSV_HEADER = ["level", "h", "dofs", "error_l2", "eoc", "cost", "outer_iters"]


@dataclass
class StudyRecord:
    level: int  # subdivisions per side
    h_max: float
    dofs: int  # interior vertices
    control_error_l2: float
    cost: float
    outer_iterations: int
    converged: bool = True
    is_reference: bool = False

    @property
    def usable(self) -> bool:
        return self.converged and not self.is_reference and self.control_error_l2 > 0


@dataclass
class EocTable:
    records: list = field(default_factory=list)
    eoc: list = field(default_factory=list)

    def mean_eoc(self, last: int = 3) -> float:
        vals = [e for e in self.eoc[-last:] if not math.isnan(e)]
        return float(np.mean(vals)) if vals else float("nan")


def inject_p0(coarse: P0Function, fine_mesh: TriMesh) -> P0Function:
    """Prolongate a P0 function onto a uniform-refinement descendant."""
    idx = ancestor_map(fine_mesh, coarse.mesh)
    if idx is None:
        raise NotNested("fine mesh is not a refinement descendant of the coarse mesh")
    return P0Function(fine_mesh, coarse.cell_values[idx])


def compute_eoc(errors, hs) -> list:
    """Pairwise rates log(e_i / e_{i+1}) / log(h_i / h_{i+1})."""
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need matching error and h sequences of length >= 2")
    if any(e == 0 for e in errors):
        raise ValueError("zero error: that level coincides with the reference solution")
    if any(e < 0 for e in errors) or any(h <= 0 for h in hs):
        raise ValueError("errors and mesh sizes must be positive")
    return [math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1]) for i in range(len(errors) - 1)]


def table_eocs(records) -> list:
    """EOC per consecutive pair; NaN where either level is unusable."""
    out = []
    for a, b in zip(records, records[1:]):
        out.append(compute_eoc([a.control_error_l2, b.control_error_l2], [a.h_max, b.h_max])[0]
                   if a.usable and b.usable else float("nan"))
    return out


def nested_meshes(levels, extents=(0.0, 1.0, 0.0, 1.0)) -> dict:
    """Meshes for every ``n`` in ``levels``, all refined from the smallest one."""
    levels = sorted(set(int(n) for n in levels))
    base = levels[0]
    for n in levels:
        ratio = n // base
        if n % base or ratio & (ratio - 1):
            raise NotNested(f"level {n} is not a power-of-two multiple of {base}")
    meshes = {}
    m, n = rectangle_mesh(base, extents), base
    while n <= levels[-1]:
        if n in levels:
            meshes[n] = m
        if n == levels[-1]:
            break
        m, n = uniform_refine(m), 2 * n
    return meshes


def run_study(
    problem: ControlProblem,
    levels,
    reference_level: int,
    opts: SolverOptions = DEFAULT_OPTIONS,
    u0=None,
) -> EocTable:
    """Solve on every level and on the reference, compare on the reference mesh."""
    levels = sorted(int(n) for n in levels)
    if reference_level < max(levels):
        raise ValueError("reference_level must be at least as fine as every study level")
    meshes = nested_meshes(levels + [reference_level], problem.extents)
    ref_mesh = meshes[reference_level]
    log.info("reference solve on n=%d", reference_level)
    ref = solve_ocp(problem, ref_mesh, opts, u0)

    records = []
    for n in levels:
        mesh = meshes[n]
        converged = True
        if n == reference_level:
            sol = ref
        else:
            log.info("study solve on n=%d", n)
            try:
                sol = solve_ocp(problem, mesh, opts, u0)
            except OuterDivergence as exc:
                sol, converged = exc.solution, False
        diff = inject_p0(sol.control, ref_mesh).cell_values - ref.control.cell_values
        err = float(np.sqrt(ref_mesh.areas @ diff**2))
        records.append(
            StudyRecord(
                level=n,
                h_max=mesh.h_max,
                dofs=int(mesh.interior.size),
                control_error_l2=err,
                cost=float(sol.cost),
                outer_iterations=sol.report.outer_iterations,
                converged=converged,
                is_reference=n == reference_level,
            )
        )
    return EocTable(records, table_eocs(records))


# --- output -------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x)) if isinstance(x, float) else str(x)


def emit_csv(table: EocTable, path) -> None:
    path = Path(path)
    pairs = list(zip(table.records, [None] + list(table.eoc)))
    pairs.sort(key=lambda rp: rp[0].level)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for rec, eoc in pairs:
                err = rec.control_error_l2 if rec.converged else None
                w.writerow([rec.level, _fmt(rec.h_max), rec.dofs, _fmt(err), _fmt(eoc), _fmt(rec.cost), rec.outer_iterations])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> list:
    """Parse a study CSV back into dictionaries of floats (None for blanks)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({k: (None if v == "" else float(v)) for k, v in r.items()})
    return out


def emit_plot(table: EocTable, path, width: int = 480, height: int = 360) -> None:
    """Write a log-log error-vs-h SVG with a dashed slope-1 guide."""
    recs = [r for r in table.records if r.converged and r.control_error_l2 > 0]
    recs.sort(key=lambda r: r.h_max)
    if len(recs) < 2:
        raise TooFewPoints("a convergence plot needs at least two nonzero errors")
    lx = np.log10([r.h_max for r in recs])
    ly = np.log10([r.control_error_l2 for r in recs])
    # slope-1 guide over the data's h range, through the finest point
    gx = np.array([lx[0], lx[-1]])
    gy = ly[0] + (gx - lx[0])
    allx = lx
    ally = np.concatenate([ly, gy])
    xlo, xhi = allx.min(), allx.max()
    ylo, yhi = ally.min(), ally.max()
    mx, my = 0.08 * max(xhi - xlo, 1e-3), 0.08 * max(yhi - ylo, 1e-3)
    xlo, xhi, ylo, yhi = (float(v) for v in (xlo - mx, xhi + mx, ylo - my, yhi + my))
    left, right, top, bottom = 70, 20, 20, 50
    pw, ph = width - left - right, height - top - bottom

    def to_px(x, y):
        return (left + (x - xlo) / (xhi - xlo) * pw, top + (yhi - y) / (yhi - ylo) * ph)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    svg.set("data-xrange", f"{xlo!r} {xhi!r}")
    svg.set("data-yrange", f"{ylo!r} {yhi!r}")
    ET.SubElement(svg, "rect", x=str(left), y=str(top), width=str(pw), height=str(ph),
                  fill="none", stroke="black")
    for dec in range(math.ceil(xlo), math.floor(xhi) + 1):
        px, _ = to_px(dec, ylo)
        ET.SubElement(svg, "line", x1=f"{px:.3f}", y1=str(top + ph), x2=f"{px:.3f}", y2=str(top + ph + 5), stroke="black")
        ET.SubElement(svg, "text", x=f"{px:.3f}", y=str(top + ph + 18), **{"text-anchor": "middle", "font-size": "11"}).text = f"1e{dec}"
    for dec in range(math.ceil(ylo), math.floor(yhi) + 1):
        _, py = to_px(xlo, dec)
        ET.SubElement(svg, "line", x1=str(left - 5), y1=f"{py:.3f}", x2=str(left), y2=f"{py:.3f}", stroke="black")
        ET.SubElement(svg, "text", x=str(left - 8), y=f"{py + 4:.3f}", **{"text-anchor": "end", "font-size": "11"}).text = f"1e{dec}"

    gpts = [to_px(x, y) for x, y in zip(gx, gy)]
    ET.SubElement(svg, "polyline", id="guide", fill="none", stroke="gray", **{"stroke-dasharray": "6,4"},
                  points=" ".join(f"{x:.6f},{y:.6f}" for x, y in gpts))
    dpts = [to_px(x, y) for x, y in zip(lx, ly)]
    line = ET.SubElement(svg, "polyline", id="data", fill="none", stroke="navy",
                         points=" ".join(f"{x:.6f},{y:.6f}" for x, y in dpts))
    line.set("data-log10", " ".join(f"{float(x)!r},{float(y)!r}" for x, y in zip(lx, ly)))
    for x, y in dpts:
        ET.SubElement(svg, "circle", cx=f"{x:.6f}", cy=f"{y:.6f}", r="3", fill="navy")
    ET.SubElement(svg, "text", x=str(left + pw / 2), y=str(height - 10), **{"text-anchor": "middle"}).text = "h"
    ET.SubElement(svg, "text", x="15", y=str(top + ph / 2), transform=f"rotate(-90 15 {top + ph / 2})",
                  **{"text-anchor": "middle"}).text = "L2 control error"
    try:
        ET.ElementTree(svg).write(Path(path), encoding="utf-8", xml_declaration=True)
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc.strerror or exc}") from exc


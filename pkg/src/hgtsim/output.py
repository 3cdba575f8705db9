"""Stable CSV/JSON output schemas for every artifact the CLI emits.

Column contracts (exact names, long format):

    trajectory.csv   time,trait,count        one row per snapshot per species
    pde.csv          time,trait,density      one row per snapshot per cell
    ode.csv          time,n_x,n_y
    tss.csv          time,x                  piecewise-constant jump path
    canonical.csv    time,x
    fixed_points.csv kind,n_x,n_y,eig1_re,eig1_im,eig2_re,eig2_im,
                     classification,index,residual
    sweep_stats.csv  time,n_q10,n_q50,n_q90,trait_q10,trait_q50,trait_q90,
                     extinct_fraction

Floats are written with repr (shortest round-trip), so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

TRAJECTORY_HEADER = "time,trait,count"
PDE_HEADER = "time,trait,density"
ODE_HEADER = "time,n_x,n_y"
PATH_HEADER = "time,x"
FIXED_POINTS_HEADER = (
    "kind,n_x,n_y,eig1_re,eig1_im,eig2_re,eig2_im,classification,index,residual"
)
SWEEP_HEADER = "time,n_q10,n_q50,n_q90,trait_q10,trait_q50,trait_q90,extinct_fraction"


def fmt(value) -> str:
    """Deterministic cell formatting: ints bare, floats via repr."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v != v:
            return "nan"
        return repr(v)
    return str(value)


def write_csv(path, header: str, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def trajectory_rows(traj):
    """Long-format rows for a stochastic Trajectory."""
    for t, pop in zip(traj.times, traj.snapshots):
        if pop.total == 0:
            yield (float(t), float("nan"), 0)
            continue
        for trait, count in zip(pop.traits, pop.counts):
            yield (float(t), float(trait), int(count))


def ode_rows(times, states):
    for t, (nx, ny) in zip(times, states):
        yield (float(t), float(nx), float(ny))


def pde_rows(times, densities, centers):
    for t, row in zip(times, densities):
        for x, u in zip(centers, row):
            yield (float(t), float(x), float(u))


def path_rows(times, values):
    for t, x in zip(times, values):
        yield (float(t), float(x))


def fixed_point_rows(points):
    for fp in points:
        e1, e2 = fp.eigenvalues
        yield (
            fp.kind,
            float(fp.location[0]),
            float(fp.location[1]),
            float(e1.real),
            float(e1.imag),
            float(e2.real),
            float(e2.imag),
            fp.classification,
            int(fp.poincare_index),
            float(fp.residual),
        )


def run_summary(
    status: str,
    wall_time: float | None,
    events: int | None,
    population,
    files: list[str],
    extra: dict | None = None,
) -> dict:
    """RunSummary dictionary; population may be None for non-stochastic runs."""
    terminal = {"n": None, "mean_trait": None, "trait_variance": None}
    if population is not None:
        terminal["n"] = int(population.total)
        if population.total > 0:
            terminal["mean_trait"] = float(population.mean_trait())
            terminal["trait_variance"] = float(population.trait_variance())
    out = {
        "status": status,
        "wall_time_s": wall_time,
        "events": events,
        "terminal": terminal,
        "files": sorted(files),
    }
    if extra:
        out.update(extra)
    return out

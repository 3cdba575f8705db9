"""Command-line orchestration.

Subcommands (every one accepts --preset NAME or --scenario FILE plus
--out-dir):

    simulate    stochastic run            -> trajectory.csv + summary.json
    ode         two-trait deterministic   -> ode.csv + summary.json
    pde         trait-grid deterministic  -> pde.csv + summary.json
    phase       fixed points + diagram    -> phase.json + fixed_points.csv
    invade      invasion calculators      -> invasion.json
    tss         substitution sequence     -> tss.csv + summary.json
    canonical   canonical trait flow      -> canonical.csv + summary.json
    sweep       replicate ensemble        -> sweep_stats.csv + sweep_summary.json

Errors exit nonzero with a message on stderr.  Sweep statistics are
byte-identical for any --parallelism at a fixed base seed.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import evolution, output, phase
from .gillespie import detect_resurgences, run_ensemble, simulate
from .model import Population
from .odes import GridDensity, GridOperator, integrate_grid, integrate_two_trait, two_trait_rhs
from .scenario import Scenario, load_scenario, preset, preset_names

__all__ = ["main", "build_parser"]


def _load(args) -> Scenario:
    if args.preset and args.scenario:
        raise SystemExit("give either --preset or --scenario, not both")
    if args.preset:
        return preset(args.preset)
    if args.scenario:
        return load_scenario(args.scenario)
    raise SystemExit("a scenario is required (--preset or --scenario)")


def _pair(args, scenario: Scenario) -> tuple[float, float]:
    if args.pair is not None:
        x, y = args.pair
        return float(x), float(y)
    if len(scenario.initial) >= 2:
        return scenario.initial[0][0], scenario.initial[1][0]
    raise SystemExit(
        "this command needs a trait pair: pass --pair X Y or use a scenario "
        "with two initial species"
    )


def _outdir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_common(sub):
    sub.add_argument("--preset", choices=preset_names(), help="shipped scenario preset")
    sub.add_argument("--scenario", help="scenario YAML file")
    sub.add_argument("--out-dir", default="hgtsim_out", help="artifact directory")


def cmd_simulate(args) -> int:
    scenario = _load(args)
    out = _outdir(args)
    t0 = time.perf_counter()
    traj = simulate(scenario, seed=args.seed, t_max=args.t_max, cadence=args.cadence)
    wall = time.perf_counter() - t0
    csv_path = output.write_csv(
        out / "trajectory.csv", output.TRAJECTORY_HEADER, output.trajectory_rows(traj)
    )
    resurgences = detect_resurgences(traj.times, traj.mean_traits())
    summary = output.run_summary(
        traj.status,
        wall,
        traj.events,
        traj.final(),
        [str(csv_path)],
        extra={
            "seed": traj.seed,
            "resurgence_events": [[t, d] for t, d in resurgences],
        },
    )
    output.write_json(out / "summary.json", summary)
    print(f"{traj.status} after {traj.events} events; wrote {csv_path}")
    return 0


def cmd_ode(args) -> int:
    scenario = _load(args)
    out = _outdir(args)
    x, y = _pair(args, scenario)
    params = scenario.two_trait(x, y)
    if args.initial is not None:
        init = (float(args.initial[0]), float(args.initial[1]))
    else:
        counts = dict((t, c) for t, c in scenario.initial)
        init = (counts.get(x, 0) / scenario.K, counts.get(y, 0) / scenario.K)
    t_max = args.t_max if args.t_max is not None else scenario.t_max
    cadence = args.cadence if args.cadence is not None else scenario.cadence
    t_eval = np.arange(0.0, t_max + cadence / 2, cadence)
    t0 = time.perf_counter()
    traj = integrate_two_trait(init, params, t_max, t_eval=t_eval)
    wall = time.perf_counter() - t0
    csv_path = output.write_csv(
        out / "ode.csv", output.ODE_HEADER, output.ode_rows(traj.times, traj.states)
    )
    summary = output.run_summary(
        "integrated",
        wall,
        None,
        None,
        [str(csv_path)],
        extra={
            "pair": [x, y],
            "initial": list(init),
            "final": [float(v) for v in traj.final()],
        },
    )
    output.write_json(out / "summary.json", summary)
    print(f"integrated to t={t_max}; final state {traj.final()}")
    return 0


def cmd_pde(args) -> int:
    scenario = _load(args)
    out = _outdir(args)
    op = GridOperator(scenario, m=args.grid_size)
    u0 = GridDensity.from_point_masses(
        scenario.space,
        args.grid_size,
        [(t, c / scenario.K) for t, c in scenario.initial],
    )
    t_max = args.t_max if args.t_max is not None else scenario.t_max
    cadence = args.cadence if args.cadence is not None else scenario.cadence
    t_eval = np.arange(0.0, t_max + cadence / 2, cadence)
    t0 = time.perf_counter()
    times, densities, final = integrate_grid(u0, scenario, t_max, t_eval=t_eval, operator=op)
    wall = time.perf_counter() - t0
    csv_path = output.write_csv(
        out / "pde.csv", output.PDE_HEADER, output.pde_rows(times, densities, op.centers)
    )
    summary = output.run_summary(
        "integrated",
        wall,
        None,
        None,
        [str(csv_path)],
        extra={"grid_size": args.grid_size, "final_mass": final.mass},
    )
    output.write_json(out / "summary.json", summary)
    print(f"integrated to t={t_max}; final mass {final.mass:.6g}")
    return 0


def _nullcline_points(params, which: str, box: float, resolution: int = 220):
    """Zero set of the non-trivial factor of one equation, as points."""
    grid = np.linspace(0.0, box, resolution)
    pts = []
    for a in grid:
        vals = []
        for b in grid:
            state = (a, b) if which == "x" else (b, a)
            total = state[0] + state[1]
            denom = params.beta + params.mu * total
            flux = params.alpha_xy / denom if denom > 0 else 0.0
            if which == "x":
                vals.append(params.rx - params.cxx * state[0] - params.cxy * state[1] + flux * state[1])
            else:
                vals.append(params.ry - params.cyx * state[0] - params.cyy * state[1] - flux * state[0])
        vals = np.asarray(vals)
        sign_change = np.flatnonzero(vals[:-1] * vals[1:] < 0)
        for idx in sign_change:
            frac = vals[idx] / (vals[idx] - vals[idx + 1])
            root = grid[idx] + frac * (grid[idx + 1] - grid[idx])
            pts.append([float(a), float(root)] if which == "x" else [float(root), float(a)])
    return pts


def cmd_phase(args) -> int:
    scenario = _load(args)
    out = _outdir(args)
    x, y = _pair(args, scenario)
    params = scenario.two_trait(x, y)
    boundary = phase.boundary_fixed_points(params)
    try:
        interior = phase.interior_fixed_points(params)
        degenerate = None
    except phase.DegenerateFixedLineError as err:
        interior = []
        degenerate = str(err)
    label = phase.classify_diagram(params)
    poincare = phase.poincare_consistency(boundary, interior)
    csv_path = output.write_csv(
        out / "fixed_points.csv",
        output.FIXED_POINTS_HEADER,
        output.fixed_point_rows(boundary + interior),
    )

    box = 1.5 * max(params.nbar_x, params.nbar_y)
    grid = np.linspace(box / 16, box, 12)
    field = []
    for nx in grid:
        for ny in grid:
            d = two_trait_rhs((nx, ny), params)
            field.append([float(nx), float(ny), float(d[0]), float(d[1])])

    doc = {
        "pair": [x, y],
        "params": {
            "bx": params.bx, "dx": params.dx, "by": params.by, "dy": params.dy,
            "cxx": params.cxx, "cxy": params.cxy, "cyx": params.cyx, "cyy": params.cyy,
            "tau_xy": params.tau_xy, "tau_yx": params.tau_yx,
            "beta": params.beta, "mu": params.mu,
        },
        "fitness": {
            "f_y_vs_x": phase.fitness_f(params, "y"),
            "f_x_vs_y": phase.fitness_f(params, "x"),
            "S_y_vs_x": phase.fitness_S(params, "y"),
            "S_x_vs_y": phase.fitness_S(params, "x"),
        },
        "fixed_points": [
            {
                "kind": fp.kind,
                "location": [fp.location[0], fp.location[1]],
                "classification": fp.classification,
                "index": fp.poincare_index,
                "eigenvalues": [[e.real, e.imag] for e in fp.eigenvalues],
                "residual": fp.residual,
            }
            for fp in boundary + interior
        ],
        "diagram_id": label.diagram_id,
        "degenerate_line": degenerate,
        "poincare": {
            "interior_index_sum": poincare.interior_index_sum,
            "expected_sum": poincare.expected_sum,
            "passed": poincare.passed,
            "skipped": poincare.skipped,
        },
        "nullclines": {
            "x": _nullcline_points(params, "x", box),
            "y": _nullcline_points(params, "y", box),
        },
        "vector_field": field,
        "files": [str(csv_path)],
    }
    if params.is_constant_C():
        rep = phase.constant_C_report(params)
        doc["constant_C"] = {
            "regime": rep.regime,
            "phat_invader": rep.phat,
            "exists": rep.exists,
            "stable": rep.stable,
            "fixation": rep.fixation,
            "invader_fixes": rep.invader_fixes,
        }
    json_path = output.write_json(out / "phase.json", doc)
    print(f"diagram {label.diagram_id}; {len(interior)} interior point(s); wrote {json_path}")
    return 0


def cmd_invade(args) -> int:
    scenario = _load(args)
    out = _outdir(args)
    x, y = _pair(args, scenario)
    K = args.K if args.K is not None else scenario.K
    report = evolution.invasion_report(y, x, scenario, K=K)
    doc = report.to_dict()
    doc.update({"pair": [x, y], "K": K, "eta": args.eta})
    if args.replicates > 0:
        mc = evolution.mc_invasion(
            y,
            x,
            scenario,
            K=K,
            replicates=args.replicates,
            eta=args.eta,
            base_seed=args.seed if args.seed is not None else scenario.seed,
        )
        doc["mc"] = {
            "estimate": mc.estimate,
            "stderr": mc.stderr,
            "successes": mc.successes,
            "replicates": mc.replicates,
        }
    json_path = output.write_json(out / "invasion.json", doc)
    msg = f"S={report.S:.6g} P={report.P:.6g}"
    if args.replicates > 0:
        msg += f" mc={doc['mc']['estimate']:.6g}±{doc['mc']['stderr']:.2g}"
    print(f"{msg}; wrote {json_path}")
    return 0


def cmd_tss(args) -> int:
    scenario = _load(args)
    out = _outdir(args)
    x0 = args.x0 if args.x0 is not None else scenario.initial[0][0]
    seed = args.seed if args.seed is not None else scenario.seed
    t0 = time.perf_counter()
    path = evolution.tss_simulate(
        x0, scenario, t_max_evo=args.t_max_evo, seed=seed, log_candidates=False
    )
    wall = time.perf_counter() - t0
    csv_path = output.write_csv(
        out / "tss.csv", output.PATH_HEADER, output.path_rows(path.times, path.traits)
    )
    summary = output.run_summary(
        "completed",
        wall,
        None,
        None,
        [str(csv_path)],
        extra={"x0": x0, "jumps": int(len(path.times) - 1), "t_end": path.t_end, "seed": seed},
    )
    output.write_json(out / "summary.json", summary)
    print(f"{len(path.times) - 1} substitutions by t={path.t_end:.6g}; wrote {csv_path}")
    return 0


def cmd_canonical(args) -> int:
    scenario = _load(args)
    out = _outdir(args)
    x0 = args.x0 if args.x0 is not None else scenario.initial[0][0]
    t_eval = np.linspace(0.0, args.t_max, 501)
    t0 = time.perf_counter()
    path = evolution.canonical_integrate(x0, scenario, t_max=args.t_max, t_eval=t_eval)
    wall = time.perf_counter() - t0
    csv_path = output.write_csv(
        out / "canonical.csv", output.PATH_HEADER, output.path_rows(path.times, path.x)
    )
    summary = output.run_summary(
        "integrated",
        wall,
        None,
        None,
        [str(csv_path)],
        extra={"x0": x0, "final": path.final()},
    )
    output.write_json(out / "summary.json", summary)
    print(f"canonical flow {x0} -> {path.final():.6g} by t={args.t_max}; wrote {csv_path}")
    return 0


def _sweep_series(traj, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """N(t) and mean trait aligned on the cadence grid (0 / NaN after
    extinction)."""
    sizes = traj.population_sizes().astype(float)
    traits = traj.mean_traits()
    idx = np.searchsorted(traj.times, grid, side="right") - 1
    idx = np.clip(idx, 0, len(traj.times) - 1)
    n = sizes[idx]
    mt = traits[idx]
    if traj.status == "extinction":
        gone = grid >= traj.times[-1]
        n[gone] = 0.0
        mt[gone] = np.nan
    return n, mt


def cmd_sweep(args) -> int:
    scenario = _load(args)
    out = _outdir(args)
    base = args.seed if args.seed is not None else scenario.seed
    t_max = args.t_max if args.t_max is not None else scenario.t_max
    cadence = args.cadence if args.cadence is not None else scenario.cadence
    replicates = args.replicates
    grid = np.arange(0.0, t_max + cadence / 2, cadence)

    t0 = time.perf_counter()
    results: list = [None] * replicates
    failures: list[tuple[int, str]] = []
    try:
        trajs = run_ensemble(
            scenario,
            replicates,
            base_seed=base,
            parallelism=args.parallelism,
            t_max=t_max,
            cadence=cadence,
        )
        results = list(trajs)
    except Exception:
        # fall back to serial execution so individual failures are reported
        from . import seeds as _seeds

        for k in range(replicates):
            try:
                results[k] = simulate(
                    scenario, seed=_seeds.substream(base, k), t_max=t_max, cadence=cadence
                )
            except Exception as err:  # pragma: no cover - engine failures
                failures.append((k, str(err)))
    wall = time.perf_counter() - t0

    ok = [tr for tr in results if tr is not None]
    n_mat = np.full((len(ok), len(grid)), np.nan)
    t_mat = np.full((len(ok), len(grid)), np.nan)
    for i, tr in enumerate(ok):
        n_mat[i], t_mat[i] = _sweep_series(tr, grid)

    rows = []
    for j, t in enumerate(grid):
        ncol = n_mat[:, j]
        tcol = t_mat[:, j]
        alive = tcol[np.isfinite(tcol)]
        tq = (
            np.quantile(alive, (0.1, 0.5, 0.9))
            if alive.size
            else (np.nan, np.nan, np.nan)
        )
        nq = np.quantile(ncol, (0.1, 0.5, 0.9))
        rows.append(
            (
                float(t),
                float(nq[0]),
                float(nq[1]),
                float(nq[2]),
                float(tq[0]),
                float(tq[1]),
                float(tq[2]),
                float(np.mean(ncol == 0)),
            )
        )
    stats_path = output.write_csv(out / "sweep_stats.csv", output.SWEEP_HEADER, rows)

    per_rep = []
    extinct = 0
    for k, tr in enumerate(results):
        if tr is None:
            continue
        final = tr.final()
        extinct += int(tr.status == "extinction")
        per_rep.append(
            {
                "replicate": k,
                "seed": tr.seed,
                "status": tr.status,
                "events": tr.events,
                "final_n": int(final.total),
                "final_mean_trait": float(final.mean_trait()) if final.total else None,
            }
        )
    doc = {
        "base_seed": base,
        "replicates": replicates,
        "t_max": t_max,
        "cadence": cadence,
        "extinct_fraction": extinct / max(len(ok), 1),
        "failed_replicates": [k for k, _ in failures],
        "failures": [{"replicate": k, "error": e} for k, e in failures],
        "per_replicate": per_rep,
        "files": [str(stats_path)],
    }
    summary_path = output.write_json(out / "sweep_summary.json", doc)
    print(
        f"{len(ok)}/{replicates} replicates in {wall:.1f}s; "
        f"extinct fraction {doc['extinct_fraction']:.3g}; wrote {summary_path}"
    )
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hgtsim",
        description="Eco-evolutionary simulation of competition with horizontal trait transfer",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="exact stochastic run")
    _add_common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--cadence", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("ode", help="two-trait deterministic system")
    _add_common(p)
    p.add_argument("--pair", nargs=2, type=float, metavar=("X", "Y"))
    p.add_argument("--initial", nargs=2, type=float, metavar=("NX", "NY"))
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--cadence", type=float, default=None)
    p.set_defaults(func=cmd_ode)

    p = subs.add_parser("pde", help="trait-grid deterministic equation")
    _add_common(p)
    p.add_argument("--grid-size", type=int, default=256)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--cadence", type=float, default=None)
    p.set_defaults(func=cmd_pde)

    p = subs.add_parser("phase", help="fixed points and diagram classification")
    _add_common(p)
    p.add_argument("--pair", nargs=2, type=float, metavar=("X", "Y"))
    p.set_defaults(func=cmd_phase)

    p = subs.add_parser("invade", help="invasion probability and fixation time")
    _add_common(p)
    p.add_argument("--pair", nargs=2, type=float, metavar=("X", "Y"))
    p.add_argument("--replicates", type=int, default=0, help="Monte Carlo replicates (0 = closed form only)")
    p.add_argument("--eta", type=float, default=0.1, help="success threshold as a fraction of K")
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_invade)

    p = subs.add_parser("tss", help="trait substitution sequence")
    _add_common(p)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--t-max-evo", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_tss)

    p = subs.add_parser("canonical", help="canonical trait flow")
    _add_common(p)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--t-max", type=float, default=1000.0)
    p.set_defaults(func=cmd_canonical)

    p = subs.add_parser("sweep", help="replicate ensemble with merged statistics")
    _add_common(p)
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="base seed for substreams")
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--cadence", type=float, default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Randomized search for mixed-regime (both beta and mu positive) parameter
sets whose two-trait system has three interior fixed points.

These configurations (two sinks and a saddle, or two saddles and a sink)
only exist under the mixed transfer normalisation; they are rare under
uniform sampling, so the search uses log-uniform scales and reports every
hit with its diagram classification.

Usage:
    python scripts/search_triple_interior.py [--trials 200000] [--seed 123]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from hgtsim import phase  # noqa: E402
from hgtsim.model import TwoTraitParams  # noqa: E402
from hgtsim.phase import interior_bracket  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--trials", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=123)
    parser.add_argument("--max-hits", type=int, default=10)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    grid = np.linspace(0, 1, 801)[1:-1]
    hits = 0
    for trial in range(args.trials):
        try:
            params = TwoTraitParams(
                bx=float(np.exp(rng.uniform(np.log(0.2), np.log(5.0)))),
                dx=0.0,
                by=float(np.exp(rng.uniform(np.log(0.2), np.log(5.0)))),
                dy=0.0,
                cxx=float(np.exp(rng.uniform(np.log(0.1), np.log(10.0)))),
                cxy=float(np.exp(rng.uniform(np.log(0.1), np.log(10.0)))),
                cyx=float(np.exp(rng.uniform(np.log(0.1), np.log(10.0)))),
                cyy=float(np.exp(rng.uniform(np.log(0.1), np.log(10.0)))),
                tau_xy=float(np.exp(rng.uniform(np.log(0.01), np.log(10.0)))),
                tau_yx=float(np.exp(rng.uniform(np.log(0.01), np.log(10.0)))),
                beta=float(np.exp(rng.uniform(np.log(0.01), np.log(5.0)))),
                mu=float(np.exp(rng.uniform(np.log(0.01), np.log(5.0)))),
            )
        except ValueError:
            continue
        vals = interior_bracket(params, grid)
        if int(np.sum(vals[:-1] * vals[1:] < 0)) < 3:
            continue
        try:
            points = phase.interior_fixed_points(params)
        except Exception:
            continue
        if len(points) != 3:
            continue
        hits += 1
        label = phase.classify_diagram(params)
        print(f"hit {hits} at trial {trial}: diagram {label.diagram_id}")
        print(f"  {params}")
        print(f"  interior kinds: {[fp.classification for fp in points]}")
        if hits >= args.max_hits:
            break
    print(f"{hits} hit(s) in {trial + 1} trials")
    return 0


if __name__ == "__main__":
    sys.exit(main())

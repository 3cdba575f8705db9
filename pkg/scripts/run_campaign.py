#!/usr/bin/env python3
"""Run the transfer-sweep campaign: every tau preset, several seeds each,
with all artifacts written under runs/<preset>/<seed>/.

Usage:
    python scripts/run_campaign.py [--runs 4] [--t-max 2000] [--out runs]

Terminal statistics are printed per run; pair with the plotting package:

    hgtsim-plots heatmap --input runs/tau06/0/trajectory.csv \
        --trait-min 0 --trait-max 4 --output tau06.png
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from hgtsim.cli import main as cli_main  # noqa: E402
from hgtsim.seeds import substream  # noqa: E402

CAMPAIGN = ("tau0", "tau02", "tau06", "tau07", "tau10")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--runs", type=int, default=4, help="seeds per preset")
    parser.add_argument("--t-max", type=float, default=2000.0)
    parser.add_argument("--out", default="runs")
    parser.add_argument("--base-seed", type=int, default=5)
    args = parser.parse_args()

    for preset in CAMPAIGN:
        for k in range(args.runs):
            out = Path(args.out) / preset / str(k)
            rc = cli_main(
                [
                    "simulate",
                    "--preset", preset,
                    "--seed", str(substream(args.base_seed, k)),
                    "--t-max", str(args.t_max),
                    "--out-dir", str(out),
                ]
            )
            if rc != 0:
                return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Regenerate the artifact fixtures used by the plotting package's tests.

Writes into frontend/tests/fixtures/:
    tau06_trajectory.csv.gz  one transfer-sweep run showing the stepwise
                             upward drift and at least one resurgence
                             (gzipped: the raw long-format file is >10 MB)
    fig2a_phase.json         phase analysis of the coexistence setup
    fig2b_invasion.json      invasion calculators with a Monte Carlo section
"""

import gzip
import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from hgtsim.cli import main as cli_main  # noqa: E402
from hgtsim.seeds import substream  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        rc = cli_main(
            [
                "simulate", "--preset", "tau06",
                "--seed", str(substream(5, 0)),
                "--cadence", "2.0",
                "--out-dir", str(tmp / "tau06"),
            ]
        )
        rc |= cli_main(["phase", "--preset", "fig2a", "--out-dir", str(tmp / "phase")])
        rc |= cli_main(
            [
                "invade", "--preset", "fig2b", "--replicates", "2000",
                "--seed", "3", "--out-dir", str(tmp / "inv"),
            ]
        )
        if rc:
            return rc
        with (tmp / "tau06" / "trajectory.csv").open("rb") as src:
            with gzip.open(FIXTURES / "tau06_trajectory.csv.gz", "wb", compresslevel=9) as dst:
                shutil.copyfileobj(src, dst)
        shutil.copy(tmp / "phase" / "phase.json", FIXTURES / "fig2a_phase.json")
        shutil.copy(tmp / "inv" / "invasion.json", FIXTURES / "fig2b_invasion.json")
    print(f"fixtures written to {FIXTURES}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

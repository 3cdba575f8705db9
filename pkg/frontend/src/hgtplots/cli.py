"""Command-line entry point: PlotSpec fields as flags."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hgtsim-plots",
        description="Render figures from hgtsim CSV/JSON artifacts",
    )
    subs = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sub = subs.add_parser(kind)
        sub.add_argument("--input", required=True, action="append",
                         help="input artifact (repeatable)")
        sub.add_argument("--output", required=True, help="output .png or .svg")
        sub.add_argument("--trait-min", type=float, default=None)
        sub.add_argument("--trait-max", type=float, default=None)
        sub.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        kind=args.kind,
        inputs=args.input,
        output=args.output,
        trait_min=args.trait_min,
        trait_max=args.trait_max,
        title=args.title,
    )
    try:
        path = render(spec)
    except (SchemaError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""The `render` command: CSV in, figure out."""

from __future__ import annotations

import argparse
import sys

import matplotlib.pyplot as plt

from .figures import PRESETS, render, spec_for
from .schema import SchemaError


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected `lo,hi`, got {text!r}")
    return float(parts[0]), float(parts[1])


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render summation-error CSV datasets as log-log figures",
    )
    parser.add_argument(
        "--csv", action="append", required=True, metavar="PATH",
        help="input CSV in the versioned schema (repeatable)",
    )
    parser.add_argument("--figure", required=True, choices=sorted(PRESETS))
    parser.add_argument("--out", required=True, metavar="PATH",
                        help="output image, format by extension")
    parser.add_argument("--bounds", metavar="ID,ID,...",
                        help="bound overlays, replacing the preset's")
    parser.add_argument("--u-line", dest="u_line", type=float, metavar="U",
                        help="unit-roundoff reference line (0 hides it)")
    parser.add_argument("--xlim", type=_pair, metavar="LO,HI")
    parser.add_argument("--ylim", type=_pair, metavar="LO,HI")
    parser.add_argument("--title")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides: dict = {}
    if args.bounds is not None:
        overrides["bounds"] = tuple(b.strip() for b in args.bounds.split(",") if b.strip())
    if args.u_line is not None:
        overrides["u_line"] = args.u_line if args.u_line > 0.0 else None
    for key in ("xlim", "ylim", "title"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    try:
        spec = spec_for(args.figure, tuple(args.csv), args.out, **overrides)
        fig = render(spec)
        plt.close(fig)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"render: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

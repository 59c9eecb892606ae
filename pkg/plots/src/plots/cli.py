"""Command-line entry points: `render` one CSV, `render-all` a directory."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, CurveSpec, PlotsError, render, render_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otfs-noma-plots",
        description="Render SER figures from sweep CSV exports.")
    sub = parser.add_subparsers(dest="command", required=True)

    one = sub.add_parser("render", help="render a single CSV")
    one.add_argument("--in", dest="csv_in", required=True, action="append",
                     help="input CSV (repeatable to overlay files)")
    one.add_argument("--kind", required=True, choices=sorted(KINDS))
    one.add_argument("--out", required=True, help="output image path")

    alldir = sub.add_parser("render-all",
                            help="render every CSV in a directory")
    alldir.add_argument("--dir", required=True, help="results directory")
    alldir.add_argument("--out-dir", default=None,
                        help="image directory (default: alongside the CSVs)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            path = render(CurveSpec(tuple(args.csv_in), args.kind, args.out))
            print(path)
        else:
            written, skipped = render_all(args.dir, args.out_dir)
            for path in written:
                print(path)
            for path, reason in skipped:
                print(f"warning: skipped {path}: {reason}", file=sys.stderr)
    except (PlotsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

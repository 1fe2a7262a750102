"""Command line entry point: ``report <kind> --in CSV [--in CSV] --out IMG``."""

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FigureSpec, ReportError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="report",
        description="Render a figure from auctionsim CSV output.")
    parser.add_argument("kind", choices=sorted(KINDS),
                        help="which figure to draw")
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, metavar="IMG",
                        help="output image path (.png or .svg)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = None
    try:
        spec = FigureSpec(kind=args.kind,
                          inputs=tuple(Path(p) for p in args.inputs),
                          out_path=Path(args.out))
        out = render(spec)
    except ReportError as exc:
        print(f"report: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"report: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

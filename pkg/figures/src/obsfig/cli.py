"""Command line: one process, one figure."""

from __future__ import annotations

import argparse
import sys

from .plot import FigureSpec, FigureSpecError, plot_spectrum


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="obsmatch-plot",
        description="Render a spectrum figure from obsmatch result CSVs.")
    parser.add_argument("--csv", action="append", required=True,
                        help="input results CSV (repeatable)")
    parser.add_argument("--kind", required=True,
                        choices=("dq_spectrum", "theta_spectrum", "theta_compare"))
    parser.add_argument("--overlay", default=None,
                        help="separate CSV holding the analytic rows")
    parser.add_argument("--out", required=True, help="output SVG path")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)

    labels = {"title": args.title} if args.title else {}
    try:
        plot_spectrum(FigureSpec(csv_paths=tuple(args.csv), kind=args.kind,
                                 out_path=args.out, overlay_path=args.overlay,
                                 labels=labels))
    except (FigureSpecError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

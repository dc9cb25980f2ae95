"""Command line for rendering run CSVs to image files.

Exit codes mirror the producer tool: 0 success, 1 runtime failure,
2 bad input (missing file, missing column, bad option value).
"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, SchemaError, render_boxplot, render_sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdeplots",
        description="Render benchmark CSVs to line charts and box plots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sweep", help="error-vs-parameter line chart")
    sp.add_argument("csv_path")
    sp.add_argument("-o", "--output", required=True,
                    help="image path (suffix picks the format)")
    sp.add_argument("--x", default=None,
                    help="x column (default: the CSV's first column)")
    sp.add_argument("--value", default=None,
                    help="y column (default: the schema's mean TDOA error)")
    sp.add_argument("--err", default=None,
                    help="spread column drawn as error bars")
    sp.add_argument("--group", default="method")
    sp.add_argument("--log", action="store_true", help="log y axis")

    bp = sub.add_parser("boxplot", help="per-group error box plot")
    bp.add_argument("csv_path")
    bp.add_argument("-o", "--output", required=True)
    bp.add_argument("--x", default="event",
                    help="grouping column along the x axis")
    bp.add_argument("--value", default=None)
    bp.add_argument("--group", default="method")
    bp.add_argument("--log", action="store_true")
    return parser


def _first_column(csv_path: str) -> str:
    from .figures import read_table

    return read_table(csv_path).header[0]


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        x_column = args.x
        if x_column is None:
            x_column = _first_column(args.csv_path)
        spec = FigureSpec(
            csv_path=args.csv_path,
            out_path=args.output,
            x_column=x_column,
            group_column=args.group,
            scale="log" if args.log else "linear",
            value_column=args.value,
            error_column=getattr(args, "err", None),
        )
        if args.command == "sweep":
            render_sweep(spec)
        else:
            render_boxplot(spec)
    except (SchemaError, ValueError) as exc:
        print(f"tdeplots: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tdeplots: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

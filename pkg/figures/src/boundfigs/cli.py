"""Command-line entry point: boundfigs --csv sweep.csv --kind fig2 --out fig.png"""

from __future__ import annotations

import argparse
import sys

from .render import ColumnMismatchError, preset, render_figure


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="boundfigs", description=__doc__)
    parser.add_argument("--csv", required=True, help="sweep CSV produced by the jumpbounds sweep command")
    parser.add_argument("--kind", required=True, choices=("fig2", "fig3a", "fig3b"))
    parser.add_argument("--out", required=True, help="output image path (.png or .pdf)")
    args = parser.parse_args(argv)
    try:
        render_figure(preset(args.kind, args.csv, args.out))
    except (ColumnMismatchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

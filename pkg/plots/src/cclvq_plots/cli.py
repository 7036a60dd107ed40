"""Command-line wrapper: ``cclvq-plots FIGURES_DIR OUT_DIR``."""

from __future__ import annotations

import argparse
import sys

from .render import SchemaError, render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cclvq-plots",
        description="Render the three report figures from exported CSV data.",
    )
    parser.add_argument("figures_dir", help="directory holding the fig*.csv files")
    parser.add_argument("out_dir", help="directory the PNGs are written into")
    args = parser.parse_args(argv)
    try:
        written = render_all(args.figures_dir, args.out_dir)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Figure command line: plot <kind> --input <csv> [--envelope <json>] --out <path>."""

from __future__ import annotations

import argparse
import sys

from .errors import PlotError
from .render import KINDS, FigureJob, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render figures from membrane-logistic CSV outputs.")
    parser.add_argument("kind", choices=KINDS,
                        help="figure kind matching the input table")
    parser.add_argument("--input", required=True,
                        help="path to the CSV table")
    parser.add_argument("--envelope", default=None,
                        help="optional envelope.json with threshold markers")
    parser.add_argument("--out", required=True,
                        help="output image path (png, svg, pdf)")
    args = parser.parse_args(argv)

    job = FigureJob(kind=args.kind, input_csv=args.input,
                    out_path=args.out, envelope=args.envelope)
    try:
        path = render(job)
    except (PlotError, OSError) as exc:
        print(f"plot failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

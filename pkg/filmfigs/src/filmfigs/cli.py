"""Command-line figure renderer.

Usage: filmfigs --kind KIND --in CSV [--in CSV ...] --out IMAGE
Exit codes: 0 on success, 1 on bad inputs (the message names the
offending file/column).
"""

import argparse
import sys

from .jobs import KINDS, FigureError, FigureJob, plot


def main(argv=None):
    ap = argparse.ArgumentParser(prog="filmfigs", description=__doc__)
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument(
        "--in", dest="inputs", action="append", required=True, metavar="CSV"
    )
    ap.add_argument("--out", required=True, metavar="IMAGE")
    args = ap.parse_args(argv)
    try:
        job = FigureJob(inputs=args.inputs, kind=args.kind, output=args.out)
        resid = plot(job)
    except FigureError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 1
    if resid is not None:
        print(f"max plotted residual: {resid:.3g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

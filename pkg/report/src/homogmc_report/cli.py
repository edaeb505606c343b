"""CLI: homogmc-report --in DIR --out DIR.

Exit codes: 0 success (including the no-data warning case), 1 I/O problems,
2 input files that do not match the sweep schema.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

from .report import ReportError, SchemaError, make_report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="homogmc-report",
                                 description="render convergence figures from sweep CSVs")
    ap.add_argument("--in", dest="in_dir", required=True, help="directory with sweep CSVs")
    ap.add_argument("--out", dest="out_dir", required=True, help="directory for figures")
    args = ap.parse_args(argv)
    if not os.path.isdir(args.in_dir):
        print(f"error: {args.in_dir}: not a directory", file=sys.stderr)
        return 1
    csvs = [p for p in sorted(glob.glob(os.path.join(args.in_dir, "*.csv")))
            if not p.endswith("_samples.csv")]
    if not csvs:
        print(f"warning: no sweep CSVs in {args.in_dir}", file=sys.stderr)
    try:
        summary = make_report(csvs, args.out_dir)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for w in summary["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    n_figs = sum(len(r["figures"]) for r in summary["runs"])
    print(f"wrote {n_figs} figures for {len(summary['runs'])} runs to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ssep-plot <kind> --run DIR [--run DIR ...] --out FILE.png

Kinds: profiles, corr-heatmap, convergence, dual-stats. Exit codes: 0 on
success, 1 on missing/invalid inputs.
"""

from __future__ import annotations

import argparse
import sys

from . import figures
from .readers import SchemaError

KINDS = {
    "profiles": lambda runs, out: figures.plot_profiles(runs[0], out),
    "corr-heatmap": lambda runs, out: figures.plot_corr_heatmap(runs[0], out),
    "convergence": figures.plot_convergence,
    "dual-stats": lambda runs, out: figures.plot_dual_stats(runs[0], out),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ssep-plot",
                                     description="figures from ssep run directories")
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument("--run", action="append", required=True,
                        help="run directory (repeatable for convergence)")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        KINDS[args.kind](args.run, args.out)
    except SchemaError as err:
        print(f"input error: {err}", file=sys.stderr)
        return 1
    print(f"{args.kind}: wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Regenerate all bound-curve CSVs (same data the `faultroute figure` command emits).

Writes four files to the output directory:
  figure_homo_rate.csv            lower bound vs per-link failure probability
  figure_homo_corr.csv            lower bound vs failure correlation (p = 0.5)
  figure_hetero.csv               lower/upper bounds vs capacity gap (uniform faults)
  figure_hetero_numeric_upper.csv bisected necessary-condition upper bound
"""

import argparse

from faultroute.cli import cmd_figure
from pathlib import Path
import time


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="figures", help="output directory (default: figures)")
    parser.add_argument("--points", type=int, default=101, help="grid points per curve")
    args = parser.parse_args()
    out = Path(args.out)
    for which in ("homo-rate", "homo-corr", "hetero"):
        cmd_figure(which, out, quiet=False, started=time.perf_counter(), n=args.points)


if __name__ == "__main__":
    main()

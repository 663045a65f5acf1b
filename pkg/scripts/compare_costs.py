#!/usr/bin/env python3
"""Cost comparison grid: preparation time per success vs infidelity target.

Runs the compare subcommand for every (chain length, filling) cell and
writes one CSV per cell into the output directory.  The CSVs carry a
provenance comment with every resolved setting, so a cell can be rerun
bit-for-bit from its own header.
"""

import argparse
import sys
from pathlib import Path

from xxfusion.cli import main as xxfusion_main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="8,16",
                   help="comma-separated fused chain lengths")
    p.add_argument("--fillings", default="1/2,1/4",
                   help="comma-separated up-spin fractions")
    p.add_argument("--targets", default="1e-3,1e-4",
                   help="comma-separated infidelity targets, descending")
    p.add_argument("--outdir", default="results", help="CSV output directory")
    return p.parse_args()


def main():
    args = parse_args()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for L in args.sizes.split(","):
        for filling in args.fillings.split(","):
            tag = filling.strip().replace("/", "of")
            out = outdir / f"compare_L{L.strip()}_f{tag}.csv"
            argv = [
                "compare",
                "--L", L.strip(),
                "--filling", filling.strip(),
                "--targets", args.targets,
                "--output", str(out),
            ]
            print(f"[compare_costs] {' '.join(argv)}", flush=True)
            rc = xxfusion_main(argv)
            worst = max(worst, rc)
            print(f"[compare_costs] wrote {out} (exit {rc})", flush=True)
    return worst


if __name__ == "__main__":
    sys.exit(main())

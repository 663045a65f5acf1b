#!/usr/bin/env python3
"""Fusion ladder driver: double a base chain up to L_final by every method.

Writes one per-level CSV per method.  The trailing comments of each CSV
hold the cumulative cost and the final infidelity, so the three files
side by side give the full ladder comparison for one (L_final, filling).
"""

import argparse
import sys
from pathlib import Path

from xxfusion.cli import main as xxfusion_main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--L-final", default="16", help="target chain length")
    p.add_argument("--L-base", default="2", help="exactly prepared base length")
    p.add_argument("--filling", default="1/2", help="up-spin fraction")
    p.add_argument("--target", default="1e-3", help="per-level infidelity target")
    p.add_argument("--methods", default="adiabatic,rodeo,hybrid",
                   help="comma-separated methods to run")
    p.add_argument("--outdir", default="results", help="CSV output directory")
    return p.parse_args()


def main():
    args = parse_args()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for method in args.methods.split(","):
        method = method.strip()
        out = outdir / f"fuse_L{args.L_final}_{method}.csv"
        argv = [
            "fuse",
            "--L-final", args.L_final,
            "--L-base", args.L_base,
            "--filling", args.filling,
            "--method", method,
            "--target", args.target,
            "--output", str(out),
        ]
        print(f"[fusion_ladder] {' '.join(argv)}", flush=True)
        rc = xxfusion_main(argv)
        worst = max(worst, rc)
        print(f"[fusion_ladder] wrote {out} (exit {rc})", flush=True)
    return worst


if __name__ == "__main__":
    sys.exit(main())

"""Convergence study on the stretching-patch benchmark.

Runs the scenario at several resolutions to t = 3 s, prints the L2 error
table and the fitted orders, and leaves diagnostics in out/patch/.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from vorflow import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--resolutions", default="10,20,40")
    ap.add_argument("--t-end", type=float, default=3.0)
    ap.add_argument("--out", default="out/patch")
    args = ap.parse_args()

    Path(args.out).mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", suffix=".ini", delete=False) as fh:
        fh.write(f"[run]\nscenario = circular_patch\nresolution = 10\n"
                 f"t_end = {args.t_end}\n")
        cfg = fh.name
    return cli.main(["converge", cfg, "--resolutions", args.resolutions,
                     "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())

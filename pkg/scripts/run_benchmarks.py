"""Drive any of the bundled benchmark scenarios at a chosen resolution.

Examples:
    python scripts/run_benchmarks.py dam_break --resolution 40
    python scripts/run_benchmarks.py rising_bubble_1 --resolution 20 --out out/rb1
    python scripts/run_benchmarks.py shock_column --resolution 8 --snapshot-every 20
"""

import argparse
import sys
import tempfile

from vorflow import cli
from vorflow.bench import SCENARIO_NAMES


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("scenario", choices=SCENARIO_NAMES)
    ap.add_argument("--resolution", type=int, default=10)
    ap.add_argument("--t-end", type=float, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    ap.add_argument("--snapshot-every", type=int, default=50)
    args = ap.parse_args()

    body = (f"[run]\nscenario = {args.scenario}\nresolution = {args.resolution}\n"
            f"seed = {args.seed}\n")
    if args.t_end is not None:
        body += f"t_end = {args.t_end}\n"
    body += f"[output]\nsnapshot_every = {args.snapshot_every}\n"
    with tempfile.NamedTemporaryFile("w", suffix=".ini", delete=False) as fh:
        fh.write(body)
        cfg = fh.name
    out = args.out or f"out/{args.scenario}"
    return cli.main(["run", cfg, "--out", out, "--seed", str(args.seed)])


if __name__ == "__main__":
    sys.exit(main())

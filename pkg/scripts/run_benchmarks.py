#!/usr/bin/env python3
"""Full comparison tables across ESN, SCR and the grown reservoir.

Equivalent to `rscn bench`, exposed as a script for notebook-free runs:

    python scripts/run_benchmarks.py --trials 20 --seed 0 --out results/
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rscn.cli import build_parser  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results")
    parser.add_argument("--tasks", nargs="+", default=None,
                        help="subset of: mg mg1 mg2 plant")
    args = parser.parse_args()
    argv = ["bench", "--trials", str(args.trials), "--seed", str(args.seed),
            "--out", args.out]
    if args.tasks:
        argv += ["--tasks", *args.tasks]
    cli = build_parser().parse_args(argv)
    return cli.func(cli)


if __name__ == "__main__":
    raise SystemExit(main())

"""Precision-estimation experiments 1a, 1b and 1c at desk scale.

    python3 scripts/run_experiment1.py --out results/ [--reps 10] [--seed 0] [--timing]

Writes one CSV per experiment and prints mean (sd) tables.
"""

import argparse
from pathlib import Path

from pcscreen.experiments import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--experiments", nargs="+", default=["1a", "1b", "1c"])
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--timing", action="store_true")
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.experiments:
        result = run_experiment(name, reps=args.reps, seed=args.seed, threads=args.threads, timing=args.timing)
        (args.out / f"experiment_{name}.csv").write_text(result.to_csv())
        print(result.format_table())


if __name__ == "__main__":
    main()

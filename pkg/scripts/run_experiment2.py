"""Classification experiment 2: HCT-PCS, HCT-FoBa and naive HCT over outer splits.

    python3 scripts/run_experiment2.py --out results/ [--p 1000 --n 400] [--outer 10 --inner 10]

The full configuration (p=5000, n=1000) needs --full-scale and several hours.
"""

import argparse
from pathlib import Path

from pcscreen.experiments import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--p", type=int, default=1000)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--outer", type=int, default=10)
    ap.add_argument("--inner", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--full-scale", action="store_true")
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    result = run_experiment("2", p=args.p, n=args.n, reps=args.outer, inner=args.inner, seed=args.seed,
                            threads=args.threads, full_scale=args.full_scale)
    (args.out / f"experiment_2_p{args.p}_n{args.n}.csv").write_text(result.to_csv())
    print(result.format_table())


if __name__ == "__main__":
    main()

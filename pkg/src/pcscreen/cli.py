"""Command-line front end.

File formats
  data CSV      one sample per line, p numeric fields, optional header line
  labels CSV    one label per line, values in {-1, 1} or {0, 1} (0 means -1)
  triplets      header "p <p> format pcs-triplet-v1", then "i j value" with i <= j
  store         "PCS1", u32 version 1, u64 p, then p*p little-endian float64 rows;
                sample size in the "<store>.json" sidecar
  model JSON    every trained HCT field, precision matrix as triplets

Exit codes: 0 success, 2 input or format error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import hct, tuning
from .covsource import (
    DataError,
    LabeledData,
    empirical_covariance,
    open_store,
    read_data_csv,
    read_labels_csv,
    read_sidecar,
)
from .experiments import PRESETS, run_experiment
from .foba import FobaConfig, foba_estimate
from .pcs import PcsConfig, SingularSubmatrixError, estimate_precision

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return tuple(round(start + k * step, 10) for k in range(count))
        values = tuple(float(x) for x in text.split(",") if x.strip())
        if not values:
            raise ValueError
        return values
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bad grid {text!r}; use start:stop:step or a comma-separated list"
        ) from None


def _q_arg(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--q must be 'auto' or a number, got {text!r}") from None


def _load_labeled(data_path, labels_path) -> LabeledData:
    data = read_data_csv(data_path)
    labels = read_labels_csv(labels_path)
    if labels.shape[0] != data.n:
        raise DataError(f"{labels_path}: {labels.shape[0]} labels for {data.n} samples")
    return LabeledData(data, labels)


def cmd_estimate(args) -> None:
    if args.method == "foba":
        if args.input is None:
            raise DataError("--method foba needs --input")
        result = foba_estimate(
            read_data_csv(args.input), FobaConfig(args.delta, args.max_steps), args.threads
        )
    else:
        if args.input is not None:
            data = read_data_csv(args.input)
            source = empirical_covariance(data, store=args.store)
            n = data.n
        elif args.store is not None:
            source = open_store(args.store, n=args.n)
            n = source.n
        else:
            raise DataError("give --input, --store, or both")
        if n is None:
            raise DataError("sample size unknown: pass --n or keep the store's .json sidecar")
        config = PcsConfig(q=args.q, delta=args.delta, max_steps=args.max_steps)
        result = estimate_precision(source, config, n=n, threads=args.threads)
    result.matrix.write(args.out)
    print(f"wrote {result.matrix.nnz} nonzeros (p={result.matrix.p}) to {args.out}")


def cmd_covstore_build(args) -> None:
    data = read_data_csv(args.input)
    empirical_covariance(data, store=args.out)
    print(f"wrote p={data.p} n={data.n} store to {args.out}")


def cmd_covstore_info(args) -> None:
    store = open_store(args.store)
    with store:
        d = store.diagonals
        meta = read_sidecar(args.store)
        print(f"path      {args.store}")
        print("format    PCS1 version 1")
        print(f"p         {store.p}")
        print(f"n         {meta.get('n', 'unknown')}")
        print(f"bytes     {os.path.getsize(args.store)}")
        print(f"diagonal  min {d.min():.6g} max {d.max():.6g}")


def cmd_classify_train(args) -> None:
    data = _load_labeled(args.data, args.labels)
    q = args.q
    if q == "auto":
        if args.method == "pcs":
            splits = tuning.cv_splits(data.labels, args.inner, args.seed)
            q = tuning.select_q(data, args.grid, splits, "pcs", args.delta, args.max_steps,
                                args.alpha0, args.threads)
            print(f"selected q={q}")
        else:
            q = args.grid[0]
    model = tuning.fit_hct(data, args.method, q, args.delta, args.max_steps, args.alpha0, args.threads)
    model.save(args.model)
    print(f"trained HCT-{args.method}: {int(np.count_nonzero(model.weights))} features selected; model in {args.model}")


def cmd_classify_predict(args) -> None:
    model = hct.HctModel.load(args.model)
    data = read_data_csv(args.data)
    labels = hct.classify(model, data.values)
    text = "\n".join(str(int(v)) for v in labels) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> None:
    overrides = dict(p=args.p, n=args.n, reps=args.reps, seed=args.seed, threads=args.threads,
                     timing=args.timing, full_scale=args.full_scale, inner=args.inner)
    result = run_experiment(args.experiment, **overrides)
    if args.out:
        Path(args.out).write_text(result.to_csv())
    print(result.format_table())


def cmd_cv(args) -> None:
    data = _load_labeled(args.data, args.labels)
    plan = tuning.make_split_plan(data.labels, args.outer, args.inner, args.seed)
    if args.plan_out:
        plan.save(args.plan_out)
    records = tuning.cross_validate(data, plan, tuple(args.methods), args.grid, args.delta,
                                    args.max_steps, args.alpha0, args.threads)
    lines = ["classifier,split,q,test_error"]
    lines += [f"{r.classifier},{r.split},{'' if r.q is None else r.q},{r.test_error:.12g}" for r in records]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for name in dict.fromkeys(r.classifier for r in records):
        errs = [r.test_error for r in records if r.classifier == name]
        print(f"# {name}: mean test error {np.mean(errs):.4f}", file=sys.stderr)


def _common(p):
    p.add_argument("--delta", type=float, default=0.1, help="ridge level delta")
    p.add_argument("--max-steps", type=int, default=30, help="screening step cap L")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="pcscreen", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a sparse precision matrix", formatter_class=fmt)
    p.add_argument("--input", help="data CSV")
    p.add_argument("--store", help="covariance store; written from --input if given, else read")
    p.add_argument("--n", type=int, help="sample size for a store without sidecar")
    p.add_argument("--method", choices=("pcs", "foba"), default="pcs")
    p.add_argument("--q", type=float, default=0.2, help="threshold multiplier q")
    _common(p)
    p.add_argument("--out", required=True, help="output triplet file")
    p.set_defaults(func=cmd_estimate)

    cs = sub.add_parser("covstore", help="build or inspect a covariance store")
    css = cs.add_subparsers(dest="action", required=True)
    p = css.add_parser("build", help="write the covariance of a data CSV", formatter_class=fmt)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_covstore_build)
    p = css.add_parser("info", help="describe a store", formatter_class=fmt)
    p.add_argument("store")
    p.set_defaults(func=cmd_covstore_info)

    cl = sub.add_parser("classify", help="train or apply an HCT classifier")
    cls = cl.add_subparsers(dest="action", required=True)
    p = cls.add_parser("train", help="train HCT with a precision estimate", formatter_class=fmt)
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--method", choices=tuning.METHODS, default="pcs",
                   help="precision estimator; identity gives naive HCT")
    p.add_argument("--q", type=_q_arg, default="auto", help="q value or 'auto' for cv selection")
    p.add_argument("--grid", type=parse_grid, default=tuning.DEFAULT_GRID,
                   help="q grid for --q auto")
    p.add_argument("--inner", type=int, default=10, help="cv splits for --q auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha0", type=float, default=hct.ALPHA0, help="HC search fraction")
    _common(p)
    p.add_argument("--model", required=True, help="output model JSON")
    p.set_defaults(func=cmd_classify_train)
    p = cls.add_parser("predict", help="label samples, one per line", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="label file (stdout if omitted)")
    p.set_defaults(func=cmd_classify_predict)

    p = sub.add_parser("simulate", help="run a seeded experiment preset", formatter_class=fmt)
    p.add_argument("--experiment", required=True, choices=sorted(PRESETS))
    p.add_argument("--p", type=int, help="dimension (preset default)")
    p.add_argument("--n", type=int, help="sample size (preset default)")
    p.add_argument("--reps", type=int, help="repetitions or outer splits (default 10)")
    p.add_argument("--inner", type=int, help="cv splits for experiment 2 (default 10)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--timing", action="store_true", help="fill the seconds column")
    p.add_argument("--full-scale", action="store_true", help="allow p > 2000")
    p.add_argument("--out", help="result CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cv", help="two-layer split evaluation of HCT classifiers", formatter_class=fmt)
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--grid", type=parse_grid, default=tuning.DEFAULT_GRID, help="q grid")
    p.add_argument("--outer", type=int, default=10)
    p.add_argument("--inner", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", nargs="+", choices=tuning.METHODS, default=list(tuning.METHODS))
    p.add_argument("--alpha0", type=float, default=hct.ALPHA0, help="HC search fraction")
    _common(p)
    p.add_argument("--out", help="per-split CSV (stdout if omitted)")
    p.add_argument("--plan-out", help="write the split plan as JSON")
    p.set_defaults(func=cmd_cv)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (SingularSubmatrixError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())

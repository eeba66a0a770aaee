"""Two-layer class-stratified 3-fold splitting and grid selection of q for HCT."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import hct
from .covsource import LabeledData, pooled_correlation, pooled_standardized
from .foba import FobaConfig, foba_estimate
from .pcs import PcsConfig, estimate_precision, estimate_precision_path
from .sparse import SparseSymmetricMatrix

METHODS = ("pcs", "foba", "identity")
DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(1, 11))


@dataclass(frozen=True)
class SplitPlan:
    """Outer (data) splits and, per outer split, inner (cv) splits.

    Outer pairs index the full sample.  Inner pairs index positions inside
    the corresponding outer training array.
    """

    seed: int
    outer: list
    inner: list
    folds: int = 3

    def to_json(self) -> str:
        def pairs(ps):
            return [{"train": tr.tolist(), "test": te.tolist()} for tr, te in ps]

        return json.dumps({
            "seed": self.seed,
            "folds": self.folds,
            "outer": pairs(self.outer),
            "inner": [pairs(ps) for ps in self.inner],
        })

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        doc = json.loads(text)

        def pairs(ps):
            return [(np.array(d["train"], dtype=int), np.array(d["test"], dtype=int)) for d in ps]

        return cls(doc["seed"], pairs(doc["outer"]), [pairs(ps) for ps in doc["inner"]], doc["folds"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def stratified_split(labels, rng: np.random.Generator, folds: int = 3):
    """One random per-class split into ``folds`` folds; fold 0 is the test set.

    Extra samples of a class go to the earliest folds.
    """
    labels = np.asarray(labels)
    train, test = [], []
    for cls in (1, -1):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        parts = np.array_split(idx, folds)
        test.append(parts[0])
        train.extend(parts[1:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def class_folds(labels, rng: np.random.Generator, folds: int = 3) -> list[np.ndarray]:
    """All per-class folds merged across classes; used to audit partitions."""
    labels = np.asarray(labels)
    merged = [[] for _ in range(folds)]
    for cls in (1, -1):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        for k, part in enumerate(np.array_split(idx, folds)):
            merged[k].append(part)
    return [np.sort(np.concatenate(m)) for m in merged]


def make_split_plan(labels, R_outer: int, R_inner: int, seed: int, folds: int = 3) -> SplitPlan:
    if R_outer < 1 or R_inner < 0:
        raise ValueError("R_outer >= 1 and R_inner >= 0 required")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    outer, inner = [], []
    for _ in range(R_outer):
        tr, te = stratified_split(labels, rng, folds)
        outer.append((tr, te))
        inner.append([stratified_split(labels[tr], rng, folds) for _ in range(R_inner)])
    return SplitPlan(seed, outer, inner, folds)


def cv_splits(labels, R: int, seed: int, folds: int = 3) -> list:
    """``R`` independent stratified splits of one training set."""
    rng = np.random.default_rng(seed)
    return [stratified_split(labels, rng, folds) for _ in range(R)]


def precision_estimate(
    data: LabeledData, method: str, q: float = 0.2, delta: float = 0.1,
    max_steps: int = 30, threads: int = 1,
) -> SparseSymmetricMatrix:
    """Precision estimate on the correlation scale used by HCT."""
    if method == "identity":
        return SparseSymmetricMatrix.identity(data.p)
    if method == "pcs":
        return estimate_precision(
            pooled_correlation(data), PcsConfig(q=q, delta=delta, max_steps=max_steps),
            threads=threads,
        ).matrix
    if method == "foba":
        return foba_estimate(
            pooled_standardized(data), FobaConfig(delta=delta, max_steps=max_steps), threads
        ).matrix
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def fit_hct(data: LabeledData, method: str, q: float = 0.2, delta: float = 0.1,
            max_steps: int = 30, alpha0: float = hct.ALPHA0, threads: int = 1) -> hct.HctModel:
    omega = precision_estimate(data, method, q, delta, max_steps, threads)
    return hct.train(data, omega, alpha0)


def grid_errors(
    train: LabeledData, grid, inner_splits, estimator: str = "pcs",
    delta: float = 0.1, max_steps: int = 30, alpha0: float = hct.ALPHA0, threads: int = 1,
) -> dict[float, float]:
    """Mean inner-test error of HCT-<estimator> for every q in ``grid``."""
    grid = sorted(set(float(q) for q in grid))
    if not grid:
        raise ValueError("empty q grid")
    if not inner_splits:
        raise ValueError("at least one inner split is required")
    totals = dict.fromkeys(grid, 0.0)
    for tr, te in inner_splits:
        fit, test = train.subset(tr), train.subset(te)
        if estimator == "pcs":
            path = estimate_precision_path(
                pooled_correlation(fit), grid,
                PcsConfig(q=grid[0], delta=delta, max_steps=max_steps), threads=threads,
            )
            omegas = {q: path[q].matrix for q in grid}
        else:
            # q does not enter FoBa or the identity
            omega = precision_estimate(fit, estimator, grid[0], delta, max_steps, threads)
            omegas = dict.fromkeys(grid, omega)
        for q in grid:
            totals[q] += hct.error_rate(hct.train(fit, omegas[q], alpha0), test)
    return {q: totals[q] / len(inner_splits) for q in grid}


def select_q(
    train: LabeledData, grid, inner_splits, estimator: str = "pcs",
    delta: float = 0.1, max_steps: int = 30, alpha0: float = hct.ALPHA0, threads: int = 1,
) -> float:
    """Grid value with the smallest mean cv-test error; ties go to the smallest q."""
    errors = grid_errors(train, grid, inner_splits, estimator, delta, max_steps, alpha0, threads)
    best = min(errors.values())
    return min(q for q, e in errors.items() if e == best)


@dataclass(frozen=True)
class CvRecord:
    classifier: str
    split: int
    q: float | None
    test_error: float


def classifier_name(method: str) -> str:
    return {"pcs": "HCT-PCS", "foba": "HCT-FoBa", "identity": "nHCT"}[method]


def cross_validate(
    data: LabeledData, plan: SplitPlan, methods=("pcs", "foba", "identity"),
    grid=DEFAULT_GRID, delta: float = 0.1, max_steps: int = 30,
    alpha0: float = hct.ALPHA0, threads: int = 1,
) -> list[CvRecord]:
    """Outer test error per split and method; q for PCS is chosen on the inner splits."""
    records = []
    for k, (tr, te) in enumerate(plan.outer):
        fit, test = data.subset(tr), data.subset(te)
        for method in methods:
            q = None
            if method == "pcs":
                q = select_q(fit, grid, plan.inner[k], "pcs", delta, max_steps, alpha0, threads)
            model = fit_hct(fit, method, q if q is not None else 0.2, delta, max_steps, alpha0, threads)
            records.append(CvRecord(classifier_name(method), k, q, hct.error_rate(model, test)))
    return records

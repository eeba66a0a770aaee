"""Seeded experiment runners: precision estimation (1a, 1b, 1c) and classification (2)."""

from __future__ import annotations

import csv
import io
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .covsource import empirical_covariance
from .foba import FobaConfig, foba_estimate
from .pcs import PcsConfig, estimate_precision
from .simlab import ClassSpec, ModelSpec, error_report, generate_precision, sample_gaussian, sample_two_class
from .tuning import DEFAULT_GRID, cross_validate, make_split_plan

ESTIMATION_COLUMNS = ("experiment", "estimator", "p", "n", "rep", "spectral", "frobenius", "l1", "hamming", "seconds")
CLASSIFICATION_COLUMNS = ("experiment", "classifier", "split", "test_error")
METRICS = ("spectral", "frobenius", "l1", "hamming")
FULL_SCALE_P = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    p: int
    n: int
    q: float
    delta: float
    max_steps: int
    reps: int = 10
    seed: int = 0
    rho: float = 0.4
    epsilon: float = 0.01
    estimators: tuple = ("pcs", "foba")
    epsilon_p: float = 0.1
    tau_p: float = 3.5
    inner: int = 10
    grid: tuple = DEFAULT_GRID
    threads: int = 1
    timing: bool = False
    full_scale: bool = False

    @property
    def is_classification(self) -> bool:
        return self.name == "2"


PRESETS = {
    "1a": ExperimentConfig("1a", "tridiag", 1000, 500, q=1.5, delta=0.0, max_steps=15),
    "1b": ExperimentConfig("1b", "block3", 1500, 500, q=1.5, delta=0.0, max_steps=15),
    "1c": ExperimentConfig("1c", "wigner", 1000, 500, q=0.75, delta=0.0, max_steps=30),
    "2": ExperimentConfig(
        "2", "tridiag", 1000, 400, q=0.2, delta=0.1, max_steps=30,
        estimators=("pcs", "foba", "identity"),
    ),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    """Preset for ``name`` with ``None``-valued overrides ignored."""
    if name not in PRESETS:
        raise ValueError(f"unknown experiment {name!r}; expected one of {sorted(PRESETS)}")
    return replace(PRESETS[name], **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    estimation: list = field(default_factory=list)
    classification: list = field(default_factory=list)

    @property
    def columns(self):
        return CLASSIFICATION_COLUMNS if self.config.is_classification else ESTIMATION_COLUMNS

    @property
    def rows(self):
        return self.classification if self.config.is_classification else self.estimation

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in self.columns])
        return buf.getvalue()

    def summary(self) -> list[dict]:
        """Mean and sample sd per (method, measure), in first-seen method order."""
        key = "classifier" if self.config.is_classification else "estimator"
        measures = ("test_error",) if self.config.is_classification else METRICS
        out = []
        for name in dict.fromkeys(r[key] for r in self.rows):
            sel = [r for r in self.rows if r[key] == name]
            for m in measures:
                vals = np.array([r[m] for r in sel], dtype=float)
                sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
                out.append({"method": name, "measure": m, "mean": float(vals.mean()), "sd": sd})
        return out

    def format_table(self) -> str:
        c = self.config
        lines = [f"experiment {c.name}: p={c.p} n={c.n} reps={c.reps} seed={c.seed}"]
        for s in self.summary():
            lines.append(f"  {s['method']:<10} {s['measure']:<11} {s['mean']:.4f} ({s['sd']:.4f})")
        return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _check_scale(config: ExperimentConfig) -> None:
    if config.p > FULL_SCALE_P:
        if not config.full_scale:
            raise ValueError(
                f"p={config.p} exceeds desk scale ({FULL_SCALE_P}); pass --full-scale (full_scale=True) to run it"
            )
        warnings.warn(f"full-scale run with p={config.p}: expect long runtimes and large memory use")


def _estimate(name, data, config: ExperimentConfig):
    if name == "pcs":
        cfg = PcsConfig(q=config.q, delta=config.delta, max_steps=config.max_steps)
        return estimate_precision(empirical_covariance(data), cfg, threads=config.threads).matrix
    if name == "foba":
        cfg = FobaConfig(delta=config.delta, max_steps=config.max_steps)
        return foba_estimate(data, cfg, config.threads).matrix
    raise ValueError(f"unknown estimator {name!r}")


ESTIMATOR_LABELS = {"pcs": "PCS", "foba": "FoBa"}


def run_estimation(config: ExperimentConfig) -> ExperimentResult:
    """Omega is drawn once from ``seed``; repetition ``r`` samples with seed ``seed + r``."""
    omega, sigma = generate_precision(
        ModelSpec(config.kind, config.p, config.rho, config.epsilon, config.seed)
    )
    result = ExperimentResult(config)
    for rep in range(config.reps):
        data = sample_gaussian(sigma, config.n, config.seed + rep)
        for name in config.estimators:
            start = time.perf_counter()
            hat = _estimate(name, data, config)
            elapsed = time.perf_counter() - start
            row = {
                "experiment": config.name, "estimator": ESTIMATOR_LABELS[name],
                "p": config.p, "n": config.n, "rep": rep,
                **error_report(hat, omega).as_dict(),
                "seconds": elapsed if config.timing else None,
            }
            result.estimation.append(row)
    return result


def run_classification(config: ExperimentConfig) -> ExperimentResult:
    """One labeled sample from ``seed``; ``reps`` outer splits with ``inner`` cv splits each."""
    spec = ClassSpec(ModelSpec(config.kind, config.p, config.rho, config.epsilon, config.seed),
                     config.epsilon_p, config.tau_p, config.seed)
    data, _ = sample_two_class(spec, config.n, config.seed)
    plan = make_split_plan(data.labels, config.reps, config.inner, config.seed)
    records = cross_validate(data, plan, config.estimators, config.grid, config.delta,
                             config.max_steps, threads=config.threads)
    result = ExperimentResult(config)
    result.classification = [
        {"experiment": config.name, "classifier": r.classifier, "split": r.split, "test_error": r.test_error}
        for r in records
    ]
    return result


def run_experiment(name: str, **overrides) -> ExperimentResult:
    config = preset(name, **overrides)
    _check_scale(config)
    if config.is_classification:
        return run_classification(config)
    return run_estimation(config)

"""Synthetic precision matrices, Gaussian samplers, and estimation error measures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covsource import DataMatrix, LabeledData
from .sparse import SparseSymmetricMatrix

BLOCK3 = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.7], [0.5, 0.7, 1.0]])
WIGNER_RETRIES = 20


@dataclass(frozen=True)
class ModelSpec:
    """Which precision matrix to generate.

    ``kind`` is ``"tridiag"`` (off-diagonal ``rho``), ``"block3"`` (3x3
    blocks) or ``"wigner"`` (Bernoulli(``epsilon``) graph, condition number
    ``p``).  ``seed`` only matters for ``"wigner"``.
    """

    kind: str
    p: int
    rho: float = 0.4
    epsilon: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("tridiag", "block3", "wigner"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.p < 3:
            raise ValueError(f"p >= 3 required, got {self.p}")
        if self.kind == "block3" and self.p % 3:
            raise ValueError(f"block3 needs p divisible by 3, got p={self.p}")


@dataclass(frozen=True)
class ClassSpec:
    """Two-class model: rare/weak contrast mean over a base precision matrix."""

    model: ModelSpec
    epsilon_p: float = 0.1
    tau_p: float = 3.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.epsilon_p < 1:
            raise ValueError(f"epsilon_p must be in (0, 1), got {self.epsilon_p}")
        if self.tau_p < 0:
            raise ValueError(f"tau_p must be >= 0, got {self.tau_p}")


@dataclass(frozen=True)
class ErrorReport:
    spectral: float
    frobenius: float
    l1: float
    hamming: float

    def as_dict(self) -> dict:
        return {
            "spectral": self.spectral,
            "frobenius": self.frobenius,
            "l1": self.l1,
            "hamming": self.hamming,
        }


def tridiagonal(p: int, rho: float) -> np.ndarray:
    return np.eye(p) + rho * (np.eye(p, k=1) + np.eye(p, k=-1))


def block3(p: int) -> np.ndarray:
    return np.kron(np.eye(p // 3), BLOCK3)


def wigner_precision(p: int, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """``0.5 W + theta I`` with condition number ``p``, scaled to unit diagonal.

    The eigenvalues of ``0.5 W + theta I`` are ``0.5 lambda + theta``; on the
    positive-definite branch the condition number is decreasing in theta,
    so the unique theta hitting ``p`` is solved in closed form.
    """
    for _ in range(WIGNER_RETRIES):
        upper = np.triu(rng.random((p, p)) < epsilon, k=1).astype(float)
        W = upper + upper.T
        lam = np.linalg.eigvalsh(W)
        lo, hi = 0.5 * lam[0], 0.5 * lam[-1]
        if hi - lo <= 0:
            continue
        theta = (hi - p * lo) / (p - 1)
        omega = (0.5 * W + theta * np.eye(p)) / theta
        return omega
    raise RuntimeError(f"no usable Wigner draw after {WIGNER_RETRIES} attempts")


def generate_precision(spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Omega, Sigma)`` with ``Sigma = Omega^{-1}``.

    Raises ``np.linalg.LinAlgError`` if Omega fails a Cholesky factorization.
    """
    if spec.kind == "tridiag":
        omega = tridiagonal(spec.p, spec.rho)
    elif spec.kind == "block3":
        omega = block3(spec.p)
    else:
        # stream [seed, 2] keeps the graph draw apart from sample seeds
        omega = wigner_precision(spec.p, spec.epsilon, np.random.default_rng([spec.seed, 2]))
    np.linalg.cholesky(omega)
    sigma = np.linalg.inv(omega)
    sigma = (sigma + sigma.T) / 2
    return omega, sigma


def sample_gaussian(cov: np.ndarray, n: int, seed: int) -> DataMatrix:
    """``n`` iid draws from ``N(0, cov)`` via the Cholesky factor of ``cov``."""
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(cov)
    return DataMatrix(rng.standard_normal((n, cov.shape[0])) @ L.T)


def contrast_mean(spec: ClassSpec, n: int) -> np.ndarray:
    """``sqrt(n) mu(j)`` iid from ``(1 - eps) delta_0 + eps delta_tau``."""
    rng = np.random.default_rng([spec.seed, 1])
    signal = rng.random(spec.model.p) < spec.epsilon_p
    return np.where(signal, spec.tau_p / math.sqrt(n), 0.0)


def sample_two_class(
    spec: ClassSpec, n: int, seed: int, cov: np.ndarray | None = None
) -> tuple[LabeledData, np.ndarray]:
    """Balanced two-class sample: ``Y_i = +1`` for the first ``n // 2`` samples.

    Sample ``i`` is drawn from ``N(Y_i mu, Sigma)``.  Returns the data and ``mu``.
    """
    if cov is None:
        cov = generate_precision(spec.model)[1]
    mu = contrast_mean(spec, n)
    y = np.where(np.arange(n) < n // 2, 1, -1)
    noise = sample_gaussian(cov, n, seed).values
    return LabeledData(DataMatrix(noise + y[:, None] * mu), y), mu


def _dense(A) -> np.ndarray:
    if isinstance(A, SparseSymmetricMatrix):
        return A.to_dense()
    return np.asarray(A, dtype=float)


def spectral_norm(A: np.ndarray, rtol: float = 1e-8, max_iter: int = 1000) -> float:
    """Largest singular value by power iteration on ``A' A``.

    Stops when the eigen-residual of the Rayleigh quotient falls below
    ``rtol`` times the quotient.  A start vector that collapses to zero is
    replaced by a second, differently shaped one.
    """
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        return 0.0
    m = A.shape[1]
    starts = [np.ones(m), np.cos(1.7 * np.arange(m) + 0.5)]
    for v in starts:
        v = v / np.linalg.norm(v)
        lam = 0.0
        for _ in range(max_iter):
            w = A.T @ (A @ v)
            lam = float(v @ w)
            if lam <= 0:
                break
            if np.linalg.norm(w - lam * v) <= rtol * lam:
                break
            v = w / np.linalg.norm(w)
        if lam > 0:
            return math.sqrt(lam)
    return 0.0


def hamming(omega_hat, omega) -> float:
    """Entries whose zero/nonzero status differs, divided by p."""
    A, B = _dense(omega_hat), _dense(omega)
    return float(np.count_nonzero((A != 0) != (B != 0))) / A.shape[0]


def error_report(omega_hat, omega_true) -> ErrorReport:
    A, B = _dense(omega_hat), _dense(omega_true)
    D = A - B
    return ErrorReport(
        spectral=spectral_norm(D),
        frobenius=float(np.linalg.norm(D)),
        l1=float(np.abs(D).sum(axis=0).max()),
        hamming=hamming(A, B),
    )

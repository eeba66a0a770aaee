"""Higher Criticism Thresholding classifier built on an estimated precision matrix."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .covsource import DataError, LabeledData, class_means, pooled_sd
from .sparse import SparseSymmetricMatrix

ALPHA0 = 0.2


@dataclass(frozen=True)
class HctModel:
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    pooled_sd: np.ndarray
    omega: SparseSymmetricMatrix
    z: np.ndarray
    z_star: np.ndarray
    z_tilde: np.ndarray
    hc_threshold: float
    j_hat: int
    weights: np.ndarray
    alpha0: float = ALPHA0

    @property
    def p(self) -> int:
        return self.mu_plus.shape[0]

    @property
    def direction(self) -> np.ndarray:
        """``Omega-hat w``, so that the discriminant is ``direction' x*``."""
        return self.omega.matvec(self.weights)

    def to_json(self) -> str:
        doc = {
            "format": "hct-model-v1",
            "p": self.p,
            "alpha0": self.alpha0,
            "hc_threshold": self.hc_threshold,
            "j_hat": self.j_hat,
            "mu_plus": self.mu_plus.tolist(),
            "mu_minus": self.mu_minus.tolist(),
            "pooled_sd": self.pooled_sd.tolist(),
            "z": self.z.tolist(),
            "z_star": self.z_star.tolist(),
            "z_tilde": self.z_tilde.tolist(),
            "weights": self.weights.astype(int).tolist(),
            "omega": [list(t) for t in self.omega.triplets()],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "HctModel":
        try:
            doc = json.loads(text)
            if doc.get("format") != "hct-model-v1":
                raise DataError(f"unknown model format {doc.get('format')!r}")
            p = int(doc["p"])
            trip = np.array(doc["omega"], dtype=float).reshape(-1, 3)
            omega = SparseSymmetricMatrix(
                p, trip[:, 0].astype(int), trip[:, 1].astype(int), trip[:, 2]
            )
            arr = {k: np.array(doc[k], dtype=float) for k in
                   ("mu_plus", "mu_minus", "pooled_sd", "z", "z_star", "z_tilde", "weights")}
        except (KeyError, ValueError, TypeError) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"malformed model document: {exc}") from None
        return cls(
            omega=omega,
            hc_threshold=float(doc["hc_threshold"]),
            j_hat=int(doc["j_hat"]),
            alpha0=float(doc["alpha0"]),
            **arr,
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "HctModel":
        return cls.from_json(Path(path).read_text())


def t_scores(data: LabeledData) -> np.ndarray:
    """Class-mean difference over ``n0 * s(j)``, ``n0 = sqrt(1/n1 + 1/n2)``."""
    mu_plus, mu_minus = class_means(data)
    n0 = math.sqrt(1.0 / data.n1 + 1.0 / data.n2)
    return (mu_plus - mu_minus) / (n0 * pooled_sd(data))


def empirical_null_normalize(z) -> np.ndarray:
    """Center by the mean of the entries and scale by their sd (divisor p)."""
    z = np.asarray(z, dtype=float)
    d = z.std()
    if not d > 0:
        raise ValueError("degenerate score vector: zero standard deviation")
    return (z - z.mean()) / d


def innovated_transform(omega: SparseSymmetricMatrix, z_star) -> np.ndarray:
    return omega.matvec(z_star)


def p_values(z_tilde, omega_diag) -> np.ndarray:
    """Two-sided normal tail of ``|z~(j)| / sqrt(omega(j, j))``."""
    omega_diag = np.asarray(omega_diag, dtype=float)
    if np.any(omega_diag <= 0):
        j = int(np.argmax(omega_diag <= 0))
        raise ValueError(f"non-positive precision diagonal at feature {j}")
    return erfc(np.abs(z_tilde) / np.sqrt(omega_diag) / math.sqrt(2.0))


def hc_search_range(p: int, alpha0: float) -> int:
    return min(max(1, math.floor(alpha0 * p + 1e-9)), p - 1)


def hc_functional(pvalues, alpha0: float = ALPHA0) -> tuple[int, np.ndarray]:
    """Maximize ``(j/p - pi_(j)) / sqrt((1 - j/p) j/p)`` over ``1 <= j <= alpha0 p``.

    Returns the 1-based maximizer (smallest on ties) and the HC values.
    """
    pi = np.sort(np.asarray(pvalues, dtype=float))
    p = pi.size
    if p < 2:
        raise ValueError("p >= 2 required")
    m = hc_search_range(p, alpha0)
    frac = np.arange(1, m + 1) / p
    hc = (frac - pi[:m]) / np.sqrt((1 - frac) * frac)
    return int(np.argmax(hc)) + 1, hc


def hc_threshold(z_tilde, omega_diag, alpha0: float = ALPHA0) -> tuple[float, int]:
    """HC threshold: magnitude of the ``j_hat``-th largest ``|z~|``."""
    j_hat, _ = hc_functional(p_values(z_tilde, omega_diag), alpha0)
    mags = np.sort(np.abs(np.asarray(z_tilde, dtype=float)))[::-1]
    return float(mags[j_hat - 1]), j_hat


def train(data: LabeledData, omega: SparseSymmetricMatrix, alpha0: float = ALPHA0) -> HctModel:
    if omega.p != data.p:
        raise DataError(f"precision matrix has p={omega.p}, data has p={data.p}")
    mu_plus, mu_minus = class_means(data)
    s = pooled_sd(data)
    z = t_scores(data)
    z_star = empirical_null_normalize(z)
    z_tilde = innovated_transform(omega, z_star)
    t, j_hat = hc_threshold(z_tilde, omega.diagonal(), alpha0)
    weights = np.sign(z_tilde) * (np.abs(z_tilde) >= t)
    return HctModel(mu_plus, mu_minus, s, omega, z, z_star, z_tilde, t, j_hat, weights, alpha0)


def discriminant(model: HctModel, X) -> np.ndarray:
    """``w' Omega-hat x*`` for each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.p:
        raise DataError(f"model expects p={model.p} features, got p={X.shape[1]}")
    x_star = (X - (model.mu_plus + model.mu_minus) / 2) / model.pooled_sd
    return x_star @ model.direction


def classify(model: HctModel, X) -> np.ndarray:
    """Labels in {-1, +1}; a discriminant of exactly 0 maps to +1."""
    return np.where(discriminant(model, X) >= 0, 1, -1)


def error_rate(model: HctModel, test: LabeledData) -> float:
    return float(np.mean(classify(model, test.X) != test.labels))

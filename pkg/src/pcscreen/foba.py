"""Forward-backward stepwise regression as a row-wise precision estimator.

Row ``i`` of the precision matrix is read off the regression of ``x_i`` on
the other columns: with coefficients ``beta`` and residual sum of squares
``RSS``, ``omega(i, i) = n / RSS`` and ``omega(i, j) = -omega(i, i) beta_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covsource import DataMatrix
from .pcs import COND_CAP, PcsResult, RowEstimate, SingularSubmatrixError, _run_rows, assemble

ZERO_SIGNAL = 1e-12


@dataclass(frozen=True)
class FobaConfig:
    """``delta``: ridge on the covariance scale; ``max_steps``: forward steps L.

    A backward deletion fires when removing a variable costs at most
    ``backward_factor`` times the RSS gain of the latest forward step.
    """

    delta: float = 0.1
    max_steps: int = 30
    backward_factor: float = 0.5

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError(f"max_steps must be an integer >= 1, got {self.max_steps}")
        if not 0 < self.backward_factor < 1:
            raise ValueError(f"backward_factor must be in (0, 1), got {self.backward_factor}")


class _RowFit:
    """Ridge least squares of column ``i`` on a subset, via the Gram matrix over n."""

    def __init__(self, X, gram, i, delta):
        self.X = X
        self.gram = gram
        self.i = i
        self.delta = delta
        self.n = X.shape[0]

    def coef(self, S):
        if not S:
            return np.zeros(0)
        G = self.gram[np.ix_(S, S)] + self.delta * np.eye(len(S))
        return np.linalg.solve(G, self.gram[S, self.i])

    def residual(self, S):
        beta = self.coef(S)
        r = self.X[:, self.i].copy()
        if S:
            r -= self.X[:, S] @ beta
        return r, beta

    def rss(self, S) -> float:
        return self.rss_many(self.gram[np.ix_(S, S)], self.gram[S, self.i])

    def rss_many(self, G, b) -> float:
        if not b.size:
            return float(self.n * self.gram[self.i, self.i])
        beta = np.linalg.solve(G + self.delta * np.eye(b.size), b)
        return float(self.n * (self.gram[self.i, self.i] - 2 * beta @ b + beta @ G @ beta))

    def deletion_costs(self, S, rss, keep):
        """RSS increase from dropping each ``S[a]`` with ``a`` in ``keep``."""
        G = self.gram[np.ix_(S, S)]
        b = self.gram[S, self.i]
        out = []
        for a in keep:
            G_a = np.delete(np.delete(G, a, 0), a, 1)
            out.append(self.rss_many(G_a, np.delete(b, a)) - rss)
        return out

    def check_addition(self, S, j):
        """Raise if, without ridge, ``x_j`` is numerically in the span of ``S``."""
        if self.delta > 0:
            return
        g = self.gram
        d = g[j, j]
        if S:
            c = g[S, j]
            d -= c @ np.linalg.solve(g[np.ix_(S, S)], c)
        if not d > g[j, j] / COND_CAP:
            raise SingularSubmatrixError(len(S) + 1, row=self.i)


def forward_scores(X: np.ndarray, r: np.ndarray, col_norms: np.ndarray) -> np.ndarray:
    """``|x_j' r| / ||x_j||`` for every column."""
    return np.abs(X.T @ r) / col_norms


def foba_row(
    data: DataMatrix, i: int, config: FobaConfig, gram: np.ndarray | None = None
) -> RowEstimate:
    """Forward-backward selection for the regression of ``x_i`` on the rest."""
    X = data.values
    n, p = X.shape
    if gram is None:
        gram = X.T @ X / n
    fit = _RowFit(X, gram, i, config.delta)
    col_norms = np.sqrt(n * np.diag(gram))
    cap = min(config.max_steps, p - 1)
    if config.delta == 0:
        cap = min(cap, n - 1)

    S: list[int] = []
    recruited: list[int] = []
    steps = 0
    forward = 0
    terminated_by = "step_cap"
    rss = fit.rss(S)
    scale = math.sqrt(n * gram[i, i])
    while forward < cap:
        r, _ = fit.residual(S)
        scores = forward_scores(X, r, col_norms)
        scores[i] = -np.inf
        scores[S] = -np.inf
        best = scores.max()
        if not best > ZERO_SIGNAL * scale:
            terminated_by = "threshold"
            break
        j = int(np.flatnonzero(scores == best)[0])
        fit.check_addition(S, j)
        S.append(j)
        recruited.append(j)
        forward += 1
        steps += 1
        new_rss = fit.rss(S)
        gain = rss - new_rss
        rss = new_rss
        while len(S) > 1:
            # the variable just added is not eligible in this iteration
            keep = [a for a, k in enumerate(S) if k != j]
            costs = fit.deletion_costs(S, rss, keep)
            a = int(np.argmin(costs))
            if costs[a] > config.backward_factor * gain:
                break
            del S[keep[a]]
            rss = fit.rss(S)
            steps += 1

    r, beta = fit.residual(S)
    rss = float(r @ r)
    w_ii = n / rss
    support = tuple(
        (s, float(-w_ii * b)) for s, b in sorted(zip(S, beta), key=lambda sb: sb[0])
    )
    return RowEstimate(
        row=i,
        support=support,
        diagonal=float(w_ii),
        recruit_order=tuple(recruited),
        steps_taken=steps,
        terminated_by=terminated_by,
    )


def foba_estimate(data: DataMatrix, config: FobaConfig, threads: int = 1) -> PcsResult:
    """Row-wise FoBa for every column, symmetrized like PCS."""
    X = data.values
    gram = X.T @ X / data.n
    rows = _run_rows(lambda i: foba_row(data, i, config, gram), data.p, threads)
    return PcsResult(assemble(data.p, rows), rows)

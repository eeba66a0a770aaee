"""Partial Correlation Screening: Screen, Clean, Symmetrize.

Each row of the precision matrix is estimated independently from the
covariance diagonal plus the rows of the covariance that the Screen step
recruits.  ``screen_row`` has two interchangeable implementations:

* ``method="fast"`` keeps growing Cholesky factors of the recruited
  submatrix (plain, ridge-shifted, and eigenvalue-test shifted), so a stage
  costs O(k p) instead of inverting one (k + 2)-matrix per candidate;
* ``method="reference"`` evaluates every candidate's partial correlation
  from scratch through :func:`ridge_inverse`.

Both follow the same tie and termination rules.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .covsource import CovarianceSource
from .sparse import SparseSymmetricMatrix, symmetrize_rows

COND_CAP = 1e12


class SingularSubmatrixError(ArithmeticError):
    """A covariance submatrix is numerically singular and delta = 0."""

    def __init__(self, size: int, row: int | None = None):
        self.size = size
        self.row = row
        where = f" while estimating row {row}" if row is not None else ""
        super().__init__(
            f"singular {size}x{size} covariance submatrix{where} "
            "(delta=0; use delta > 0 to regularize)"
        )


@dataclass(frozen=True)
class PcsConfig:
    """Tuning of PCS: threshold multiplier ``q``, ridge ``delta``, step cap ``max_steps``.

    ``eig_tol`` is the slack in the eigenvalue test of the ridge rule;
    ``tie_tol`` is the absolute gap under which two screening scores count
    as tied (the smaller index wins).
    """

    q: float = 0.2
    delta: float = 0.1
    max_steps: int = 30
    eig_tol: float = 1e-12
    tie_tol: float = 1e-12

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"q must be > 0, got {self.q}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError(f"max_steps must be an integer >= 1, got {self.max_steps}")

    def threshold(self, p: int, n: int) -> float:
        return threshold(self.q, p, n)


def threshold(q: float, p: int, n: int) -> float:
    """``q * sqrt(2 log p / n)``."""
    return q * math.sqrt(2.0 * math.log(p) / n)


@dataclass(frozen=True)
class ScreenResult:
    row: int
    recruits: tuple[int, ...]
    scores: tuple[float, ...]  # max |rho| at each evaluated stage
    steps_taken: int
    terminated_by: str  # "threshold" or "step_cap"
    rows: dict = field(default_factory=dict, repr=False, compare=False)


@dataclass(frozen=True)
class RowEstimate:
    row: int
    support: tuple[tuple[int, float], ...]
    diagonal: float
    recruit_order: tuple[int, ...]
    steps_taken: int
    terminated_by: str

    @property
    def support_set(self) -> frozenset:
        return frozenset(j for j, _ in self.support)


@dataclass(frozen=True)
class PcsResult:
    matrix: SparseSymmetricMatrix
    rows: list


def ridge_inverse(W, delta: float, eig_tol: float = 1e-12) -> np.ndarray:
    """Inverse of ``W``, or of ``W + delta I`` when some eigenvalue is below delta.

    With ``delta == 0`` the plain inverse is returned and a numerically
    singular ``W`` raises :class:`SingularSubmatrixError`.
    """
    W = np.asarray(W, dtype=float)
    lam, V = np.linalg.eigh(W)
    if delta > 0:
        if lam[0] < delta - eig_tol:
            lam = lam + delta
    else:
        mags = np.abs(lam)
        if mags.min() == 0 or mags.max() / mags.min() > COND_CAP:
            raise SingularSubmatrixError(W.shape[0])
    return (V / lam) @ V.T


def _submatrix(rows: dict, diag: np.ndarray, W: Sequence[int]) -> np.ndarray:
    """Sigma^{W,W} from cached rows; the last index needs only its diagonal."""
    W = list(W)
    k = len(W)
    A = np.empty((k, k))
    for a in range(k - 1):
        A[a] = rows[W[a]][W]
    A[-1, :-1] = A[:-1, -1]
    A[-1, -1] = diag[W[-1]]
    return A


def _rho_from_inverse(A: np.ndarray) -> float:
    return -A[0, -1] / math.sqrt(A[0, 0] * A[-1, -1])


def partial_correlation(
    source: CovarianceSource,
    i: int,
    j: int,
    S: Sequence[int],
    delta: float,
    eig_tol: float = 1e-12,
) -> float:
    """Regularized empirical partial correlation of ``i`` and ``j`` given ``S``.

    ``W = (i, *S, j)``; the result is minus the (first, last) entry of the
    ridge inverse of the covariance submatrix, normalized by the matching
    diagonals.
    """
    S = list(S)
    if i == j or i in S or j in S:
        raise ValueError("i, j must be distinct and not in S")
    if len(set(S)) != len(S):
        raise ValueError("S has duplicates")
    W = [i, *S, j]
    rows = {w: source.row(w) for w in W[:-1]}
    return _rho_from_inverse(ridge_inverse(_submatrix(rows, source.diagonals, W), delta, eig_tol))


class _GrowingCholesky:
    """Rows of ``L^{-1} M[T, :]`` for ``M = Sigma + shift I`` and a growing ordered ``T``.

    After ``k`` additions, ``schur()`` gives ``M_jj - M_jT M_TT^{-1} M_Tj``
    for every column and ``cross(i, row_i)`` gives ``M_ij - M_iT M_TT^{-1} M_Tj``.
    """

    def __init__(self, diag: np.ndarray, shift: float, capacity: int):
        p = diag.shape[0]
        self.diag = diag
        self.shift = shift
        self.U = np.empty((capacity, p))
        self.sq = np.zeros(p)
        self.k = 0

    def add(self, t: int, row_t: np.ndarray, rel_tol: float = 0.0) -> bool:
        """Append index ``t``; return False if the pivot is not positive."""
        m = row_t.copy()
        m[t] += self.shift
        if self.k:
            U = self.U[: self.k]
            m -= U[:, t] @ U
        d = m[t]
        if not d > rel_tol * (self.diag[t] + self.shift):
            return False
        m /= math.sqrt(d)
        self.U[self.k] = m
        self.k += 1
        self.sq += m * m
        return True

    def schur(self) -> np.ndarray:
        return self.diag + self.shift - self.sq

    def cross(self, i: int, row_i: np.ndarray) -> np.ndarray:
        if not self.k:
            return row_i
        U = self.U[: self.k]
        return row_i - U[:, i] @ U


def _step_cap(config: PcsConfig, p: int, n: int) -> int:
    cap = min(config.max_steps, p - 1)
    if config.delta == 0:
        cap = min(cap, max(n - 2, 0))
    return cap


def _pick(scores: np.ndarray, tie_tol: float) -> tuple[int, float]:
    best = float(scores.max())
    j = int(np.flatnonzero(scores >= best - tie_tol)[0])
    return j, best


def _screen_fast(source, i, config, t, cap):
    p = source.p
    diag = source.diagonals
    delta = config.delta
    rows = {i: source.row(i)}
    row_i = rows[i]
    excluded = np.zeros(p, dtype=bool)
    excluded[i] = True

    plain = _GrowingCholesky(diag, 0.0, cap + 1)
    ridge = _GrowingCholesky(diag, delta, cap + 1) if delta > 0 else None
    eig = None
    if delta > 0:
        # A - delta' I is positive definite iff every eigenvalue of A exceeds delta'.
        eig = _GrowingCholesky(diag, -(delta - config.eig_tol), cap + 2)
        if not eig.add(i, row_i):
            eig = None
    plain_ok = delta == 0 or eig is not None

    recruits, scores = [], []
    steps = 0
    terminated_by = "threshold"
    with np.errstate(invalid="ignore", divide="ignore"):
        while True:
            if len(recruits) >= cap:
                terminated_by = "step_cap"
                break
            steps += 1
            if excluded.all():
                scores.append(0.0)
                break
            if plain_ok:
                den = plain.schur()
                if delta == 0:
                    cand = ~excluded
                    if np.any(den[cand] <= diag[cand] / COND_CAP) or den[i] <= diag[i] / COND_CAP:
                        raise SingularSubmatrixError(len(recruits) + 2, row=i)
                rho = plain.cross(i, row_i) / np.sqrt(den[i] * den)
            if delta > 0:
                den_r = ridge.schur()
                rho_r = ridge.cross(i, row_i) / np.sqrt(den_r[i] * den_r)
                if eig is None:
                    rho = rho_r
                else:
                    rho = np.where(eig.schur() >= 0, rho, rho_r)
            score = np.abs(rho)
            score[excluded] = -np.inf
            j, best = _pick(score, config.tie_tol)
            scores.append(best)
            if best < t:
                break
            recruits.append(j)
            excluded[j] = True
            rows[j] = source.row(j)
            if plain_ok and not plain.add(j, rows[j], 0.0 if delta > 0 else 1.0 / COND_CAP):
                if delta == 0:
                    raise SingularSubmatrixError(len(recruits) + 1, row=i)
                plain_ok = False
            if delta > 0:
                ridge.add(j, rows[j])
                if eig is not None and not eig.add(j, rows[j]):
                    # eigenvalues only shrink as the set grows; ridge from now on
                    eig = None
                if eig is None or not plain_ok:
                    eig = None
                    plain_ok = False
    return ScreenResult(i, tuple(recruits), tuple(scores), steps, terminated_by, rows)


def _screen_reference(source, i, config, t, cap):
    p = source.p
    diag = source.diagonals
    rows = {i: source.row(i)}
    recruits, scores = [], []
    steps = 0
    terminated_by = "threshold"
    while True:
        if len(recruits) >= cap:
            terminated_by = "step_cap"
            break
        steps += 1
        taken = {i, *recruits}
        if len(taken) == p:
            scores.append(0.0)
            break
        score = np.full(p, -np.inf)
        for j in range(p):
            if j in taken:
                continue
            W = [i, *recruits, j]
            try:
                A = ridge_inverse(_submatrix(rows, diag, W), config.delta, config.eig_tol)
            except SingularSubmatrixError as exc:
                raise SingularSubmatrixError(exc.size, row=i) from None
            score[j] = abs(_rho_from_inverse(A))
        j, best = _pick(score, config.tie_tol)
        scores.append(best)
        if best < t:
            break
        recruits.append(j)
        rows[j] = source.row(j)
    return ScreenResult(i, tuple(recruits), tuple(scores), steps, terminated_by, rows)


def _resolve_n(source, n):
    n = source.n if n is None else n
    if n is None:
        raise ValueError("sample size n is required to compute the threshold")
    return int(n)


def screen_row(
    source: CovarianceSource,
    i: int,
    config: PcsConfig,
    n: int | None = None,
    method: str = "fast",
    threshold_value: float | None = None,
) -> ScreenResult:
    """Greedy stage-wise recruitment of nodes for row ``i``.

    At each stage the candidate with the largest ``|rho_ij(S)|`` joins ``S``
    while that maximum is at least the threshold and fewer than
    ``config.max_steps`` nodes have been recruited.
    """
    n = _resolve_n(source, n)
    t = config.threshold(source.p, n) if threshold_value is None else threshold_value
    cap = _step_cap(config, source.p, n)
    if method == "fast":
        return _screen_fast(source, i, config, t, cap)
    if method == "reference":
        return _screen_reference(source, i, config, t, cap)
    raise ValueError(f"unknown screening method {method!r}")


def truncate_screen(screen: ScreenResult, t: float) -> ScreenResult:
    """The screen that a larger threshold ``t`` would have produced.

    The greedy order does not depend on the threshold, so the result is a
    prefix of ``screen`` ending at the first stage whose score is below ``t``.
    """
    for k, s in enumerate(screen.scores):
        if s < t:
            return ScreenResult(
                screen.row, screen.recruits[:k], screen.scores[: k + 1], k + 1,
                "threshold", screen.rows,
            )
    return screen


def _recruit_gram(source, i, screen: ScreenResult) -> np.ndarray:
    """Sigma over ``(i, *recruits)`` from the row cache of ``screen``."""
    W = np.array([i, *screen.recruits])
    rows = screen.rows
    return np.vstack([rows[w][W] if w in rows else source.row(w)[W] for w in W])


def _clean_from_gram(i, screen, G, config, t, memo=None):
    memo = {} if memo is None else memo
    k = len(screen.recruits) + 1

    def invert(idx):
        key = tuple(idx)
        if key not in memo:
            try:
                memo[key] = ridge_inverse(G[np.ix_(idx, idx)], config.delta, config.eig_tol)[0]
            except SingularSubmatrixError as exc:
                raise SingularSubmatrixError(exc.size, row=i) from None
        return memo[key]

    eta = invert(range(k))
    kept = [0] + [a for a in range(1, k) if abs(eta[a]) >= t]
    first = invert(kept)
    support = tuple(
        (screen.recruits[a - 1], float(first[b])) for b, a in enumerate(kept) if b
    )
    return RowEstimate(
        row=i,
        support=support,
        diagonal=float(first[0]),
        recruit_order=screen.recruits,
        steps_taken=screen.steps_taken,
        terminated_by=screen.terminated_by,
    )


def clean_row(
    source: CovarianceSource,
    i: int,
    screen: ScreenResult | Sequence[int],
    config: PcsConfig,
    n: int | None = None,
    threshold_value: float | None = None,
) -> RowEstimate:
    """Drop weak recruits, refit on the survivors, and read off row ``i``.

    The first row of the ridge inverse over ``(i, *recruits)`` scores each
    recruit; those at or above the threshold are kept, and the first row of
    the ridge inverse over ``(i, *kept)`` is the estimate.
    """
    n = _resolve_n(source, n)
    t = config.threshold(source.p, n) if threshold_value is None else threshold_value
    if not isinstance(screen, ScreenResult):
        recruits = tuple(int(j) for j in screen)
        screen = ScreenResult(i, recruits, (), len(recruits), "threshold")
    return _clean_from_gram(i, screen, _recruit_gram(source, i, screen), config, t)


def estimate_row(source, i, config, n=None, method="fast") -> RowEstimate:
    return clean_row(source, i, screen_row(source, i, config, n, method), config, n)


def _run_rows(task, p, threads):
    if threads is None or threads <= 1:
        return [task(i) for i in range(p)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(p)))


def assemble(p: int, estimates) -> SparseSymmetricMatrix:
    return symmetrize_rows(p, {e.row: (e.diagonal, e.support) for e in estimates})


def estimate_precision(
    source: CovarianceSource,
    config: PcsConfig,
    n: int | None = None,
    threads: int = 1,
    method: str = "fast",
) -> PcsResult:
    """Estimate every row, then symmetrize ``(A + A') / 2``.

    Rows are independent; ``threads`` only changes scheduling, never the result.
    """
    n = _resolve_n(source, n)
    rows = _run_rows(lambda i: estimate_row(source, i, config, n, method), source.p, threads)
    return PcsResult(assemble(source.p, rows), rows)


def estimate_precision_path(
    source: CovarianceSource,
    qs: Sequence[float],
    config: PcsConfig,
    n: int | None = None,
    threads: int = 1,
) -> dict[float, PcsResult]:
    """PCS estimates for several ``q`` values from a single screening pass per row.

    Screening runs once at the smallest threshold; each larger threshold
    takes a prefix of that path (see :func:`truncate_screen`).
    """
    n = _resolve_n(source, n)
    qs = sorted(set(float(q) for q in qs))
    if not qs:
        raise ValueError("empty q grid")
    p = source.p
    t_of = {q: threshold(q, p, n) for q in qs}
    t_min = t_of[qs[0]]

    def task(i):
        base = screen_row(source, i, config, n, threshold_value=t_min)
        G = _recruit_gram(source, i, base)
        memo = {}  # first rows of ridge inverses, keyed by index tuple into G
        return [
            _clean_from_gram(i, truncate_screen(base, t_of[q]), G, config, t_of[q], memo)
            for q in qs
        ]

    per_row = _run_rows(task, p, threads)
    out = {}
    for k, q in enumerate(qs):
        rows = [r[k] for r in per_row]
        out[q] = PcsResult(assemble(p, rows), rows)
    return out

"""Symmetric sparse matrices stored as upper-triangle triplets."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .covsource import DataError


@dataclass(frozen=True)
class SparseSymmetricMatrix:
    """Triplets ``(i, j, value)`` with ``i <= j``; each applies to (i, j) and (j, i).

    Triplets are kept sorted by ``(i, j)`` and carry no duplicate keys.
    """

    p: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=np.int64)
        c = np.asarray(self.cols, dtype=np.int64)
        v = np.asarray(self.values, dtype=float)
        if not (r.shape == c.shape == v.shape):
            raise ValueError("rows, cols, values must have equal length")
        if r.size:
            if np.any(r > c):
                raise ValueError("triplets must satisfy i <= j")
            if r.min() < 0 or c.max() >= self.p:
                raise ValueError("triplet index out of range")
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        if r.size > 1 and np.any((np.diff(r) == 0) & (np.diff(c) == 0)):
            raise ValueError("duplicate triplet keys")
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "cols", c)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_dense(cls, A) -> "SparseSymmetricMatrix":
        A = np.asarray(A, dtype=float)
        r, c = np.nonzero(np.triu(A))
        return cls(A.shape[0], r, c, A[r, c])

    @classmethod
    def identity(cls, p: int) -> "SparseSymmetricMatrix":
        idx = np.arange(p)
        return cls(p, idx, idx, np.ones(p))

    @property
    def nnz(self) -> int:
        """Nonzero count of the full (both triangles) matrix."""
        nz = self.values != 0
        off = nz & (self.rows != self.cols)
        return int(nz.sum() + off.sum())

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.p)
        on = self.rows == self.cols
        d[self.rows[on]] = self.values[on]
        return d

    def to_scipy(self) -> sp.csr_matrix:
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.values, self.values[off]])
        return sp.csr_matrix((v, (r, c)), shape=(self.p, self.p))

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.p, self.p))
        A[self.rows, self.cols] = self.values
        A[self.cols, self.rows] = self.values
        return A

    def matvec(self, x) -> np.ndarray:
        return self.to_scipy() @ np.asarray(x, dtype=float)

    def scaled(self, factor: float) -> "SparseSymmetricMatrix":
        return SparseSymmetricMatrix(self.p, self.rows, self.cols, self.values * factor)

    def triplets(self) -> list[tuple[int, int, float]]:
        return [
            (int(i), int(j), float(v))
            for i, j, v in zip(self.rows, self.cols, self.values)
        ]

    def __eq__(self, other):
        if not isinstance(other, SparseSymmetricMatrix):
            return NotImplemented
        return (
            self.p == other.p
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def write(self, path, tag: str = "pcs-triplet-v1") -> None:
        lines = [f"p {self.p} format {tag}"]
        lines += [f"{i} {j} {v!r}" for i, j, v in self.triplets()]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "SparseSymmetricMatrix":
        text = Path(path).read_text().splitlines()
        if not text:
            raise DataError(f"{path}: empty triplet file")
        head = text[0].split()
        if len(head) != 4 or head[0] != "p" or head[2] != "format":
            raise DataError(f"{path}: bad triplet header {text[0]!r}")
        p = int(head[1])
        r, c, v = [], [], []
        for lineno, line in enumerate(text[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DataError(f"{path}: line {lineno}: expected 'i j value'")
            r.append(int(parts[0]))
            c.append(int(parts[1]))
            v.append(float(parts[2]))
        return cls(p, r, c, v)


def symmetrize_rows(p: int, row_entries) -> SparseSymmetricMatrix:
    """Build ``(A + A') / 2`` from per-row entries of a non-symmetric A.

    ``row_entries`` maps row index ``i`` to ``(diagonal, [(j, value), ...])``.
    """
    di, dv, oi, oj, ov = [], [], [], [], []
    for i in sorted(row_entries):
        diag, support = row_entries[i]
        di.append(i)
        dv.append(diag)
        for j, v in support:
            oi.append(i)
            oj.append(j)
            ov.append(v)
    oi, oj = np.array(oi, dtype=np.int64), np.array(oj, dtype=np.int64)
    lo, hi = np.minimum(oi, oj), np.maximum(oi, oj)
    keys, inverse = np.unique(lo * p + hi, return_inverse=True)
    # each key receives at most one value from each side; the absent side is 0
    sums = np.bincount(inverse, weights=np.asarray(ov, dtype=float), minlength=keys.size)
    rows = np.concatenate([np.array(di, dtype=np.int64), keys // p])
    cols = np.concatenate([np.array(di, dtype=np.int64), keys % p])
    vals = np.concatenate([np.array(dv, dtype=float), sums / 2])
    return SparseSymmetricMatrix(p, rows, cols, vals)

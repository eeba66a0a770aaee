"""Data ingestion and row-on-demand covariance access.

Estimators never see a full covariance matrix; they talk to a
:class:`CovarianceSource`, which hands out the diagonal up front and
individual rows on request.  Two sources are provided: an in-memory one
(:class:`DenseCovariance`) and a file-backed one (:class:`StoreCovariance`)
reading the ``PCS1`` binary format one row at a time.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"PCS1"
VERSION = 1
HEADER = struct.Struct("<4sIQ")  # magic, version, p
HEADER_SIZE = HEADER.size  # 16


class DataError(ValueError):
    """Malformed or invalid input data."""


class StoreFormatError(DataError):
    """A covariance store file does not match the PCS1 layout."""


@dataclass(frozen=True)
class DataMatrix:
    """n samples (rows) by p features (columns)."""

    values: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.values, dtype=float)
        if X.ndim != 2:
            raise DataError(f"data must be 2-dimensional, got shape {X.shape}")
        n, p = X.shape
        if n < 2:
            raise DataError(f"n >= 2 required, got n={n}")
        if p < 2:
            raise DataError(f"p >= 2 required, got p={p}")
        bad = np.argwhere(~np.isfinite(X))
        if bad.size:
            r, c = bad[0]
            raise DataError(f"non-finite entry at row {r}, column {c}")
        object.__setattr__(self, "values", X)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabeledData:
    """Two-class data; labels are in {-1, +1}."""

    data: DataMatrix
    labels: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.labels)
        if y.shape != (self.data.n,):
            raise DataError(f"expected {self.data.n} labels, got {y.size}")
        if not np.all(np.isin(y, (-1, 1))):
            raise DataError("labels must be in {-1, +1}")
        y = y.astype(int)
        object.__setattr__(self, "labels", y)
        if self.n1 < 2 or self.n2 < 2:
            raise DataError(
                f"each class needs >= 2 samples, got n1={self.n1}, n2={self.n2}"
            )

    @property
    def X(self) -> np.ndarray:
        return self.data.values

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def p(self) -> int:
        return self.data.p

    @property
    def n1(self) -> int:
        return int(np.sum(self.labels == 1))

    @property
    def n2(self) -> int:
        return int(np.sum(self.labels == -1))

    def subset(self, idx) -> "LabeledData":
        idx = np.asarray(idx, dtype=int)
        return LabeledData(DataMatrix(self.X[idx]), self.labels[idx])


class CovarianceSource:
    """Diagonal plus rows on demand, with per-row fetch telemetry.

    Subclasses implement ``_read_row``.  ``n`` is the sample count behind
    the matrix; screening thresholds need it, the matrix itself does not.
    """

    def __init__(self, p: int, diagonals: np.ndarray, n: int | None = None):
        self.p = int(p)
        self.diagonals = np.asarray(diagonals, dtype=float)
        self.diagonals.setflags(write=False)
        if np.any(self.diagonals <= 0):
            j = int(np.argmax(self.diagonals <= 0))
            raise DataError(f"non-positive diagonal at index {j}")
        self.n = n
        self._lock = threading.Lock()
        self.fetch_counts: Counter = Counter()

    def row(self, i: int) -> np.ndarray:
        """Return an owned copy of row ``i``."""
        i = int(i)
        if not 0 <= i < self.p:
            raise IndexError(f"row {i} out of range for p={self.p}")
        out = self._read_row(i)
        with self._lock:
            self.fetch_counts[i] += 1
        return out

    def _read_row(self, i: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def total_fetches(self) -> int:
        with self._lock:
            return sum(self.fetch_counts.values())

    def reset_telemetry(self) -> None:
        with self._lock:
            self.fetch_counts.clear()

    def to_dense(self) -> np.ndarray:
        """Materialize the whole matrix (tests and small problems only)."""
        return np.vstack([self._read_row(i) for i in range(self.p)])


class DenseCovariance(CovarianceSource):
    """In-memory covariance matrix."""

    def __init__(self, matrix, n: int | None = None):
        M = np.array(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DataError(f"covariance must be square, got shape {M.shape}")
        self._matrix = M
        super().__init__(M.shape[0], np.diag(M).copy(), n=n)

    def _read_row(self, i):
        return self._matrix[i].copy()

    def to_dense(self):
        return self._matrix.copy()


class StoreCovariance(CovarianceSource):
    """File-backed covariance in the PCS1 format.

    Each :meth:`row` call issues one positioned read of exactly ``8 p``
    bytes; the file is never loaded whole.
    """

    def __init__(self, path, n: int | None = None):
        self.path = Path(path)
        size = self.path.stat().st_size
        with open(self.path, "rb") as fh:
            head = fh.read(HEADER_SIZE)
        if len(head) < HEADER_SIZE:
            raise StoreFormatError(f"{self.path}: truncated header")
        magic, version, p = HEADER.unpack(head)
        if magic != MAGIC:
            raise StoreFormatError(f"{self.path}: bad magic {magic!r}")
        if version != VERSION:
            raise StoreFormatError(f"{self.path}: unsupported version {version}")
        if p < 1 or size != HEADER_SIZE + 8 * p * p:
            raise StoreFormatError(
                f"{self.path}: size {size} does not match p={p} "
                f"(expected {HEADER_SIZE + 8 * p * p})"
            )
        self._fd = os.open(self.path, os.O_RDONLY)
        self._row_bytes = 8 * p
        diag = np.empty(p)
        for i in range(p):
            buf = os.pread(self._fd, 8, HEADER_SIZE + self._row_bytes * i + 8 * i)
            diag[i] = struct.unpack("<d", buf)[0]
        super().__init__(p, diag, n=n)

    def _read_row(self, i):
        buf = os.pread(self._fd, self._row_bytes, HEADER_SIZE + self._row_bytes * i)
        return np.frombuffer(buf, dtype="<f8").astype(float)

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def write_store(source: CovarianceSource, path) -> Path:
    """Write ``source`` row by row in the PCS1 format."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, source.p))
        for i in range(source.p):
            fh.write(np.asarray(source._read_row(i), dtype="<f8").tobytes())
    return path


def open_store(path, n: int | None = None) -> StoreCovariance:
    """Open a PCS1 store.  If ``n`` is omitted, a sidecar is consulted."""
    if n is None:
        n = read_sidecar(path).get("n")
    return StoreCovariance(path, n=n)


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_sidecar(path, **meta) -> None:
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")


def read_sidecar(path) -> dict:
    side = sidecar_path(path)
    if not side.exists():
        return {}
    return json.loads(side.read_text())


def _cov_row(X, i, n):
    # one code path for both builders, so dense and stored rows agree bitwise
    return X[:, i] @ X / n


def empirical_covariance(data: DataMatrix, store=None) -> CovarianceSource:
    """Uncentered sample covariance ``(x_i, x_j) / n``.

    With ``store`` set, the matrix is written to that path one row at a
    time and a :class:`StoreCovariance` is returned.
    """
    X = data.values
    n = data.n
    if store is None:
        return DenseCovariance(np.vstack([_cov_row(X, i, n) for i in range(data.p)]), n=n)
    path = Path(store)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, data.p))
        for i in range(data.p):
            fh.write(_cov_row(X, i, n).astype("<f8").tobytes())
    write_sidecar(path, n=n, p=data.p)
    return StoreCovariance(path, n=n)


def pooled_sd(data: LabeledData) -> np.ndarray:
    """Pooled per-feature standard deviation with the n1 + n2 - 2 divisor."""
    centered = class_centered(data)
    s = np.sqrt(np.sum(centered**2, axis=0) / (data.n - 2))
    zero = np.flatnonzero(s <= 0)
    if zero.size:
        raise DataError(f"zero pooled standard deviation at feature {zero[0]}")
    return s


def class_means(data: LabeledData) -> tuple[np.ndarray, np.ndarray]:
    pos = data.labels == 1
    return data.X[pos].mean(axis=0), data.X[~pos].mean(axis=0)


def class_centered(data: LabeledData) -> np.ndarray:
    mu_plus, mu_minus = class_means(data)
    pos = (data.labels == 1)[:, None]
    return data.X - np.where(pos, mu_plus, mu_minus)


def pooled_standardized(data: LabeledData) -> DataMatrix:
    """Class-centered data scaled so that its Gram matrix over n is R-hat.

    Columns are scaled to unit mean square, which makes the diagonal of
    the resulting correlation exactly one.
    """
    pooled_sd(data)  # raises on constant features
    centered = class_centered(data)
    scale = np.sqrt(np.mean(centered**2, axis=0))
    return DataMatrix(centered / scale)


def pooled_correlation(data: LabeledData) -> DenseCovariance:
    """Class-mean-centered empirical correlation with unit diagonal."""
    Z = pooled_standardized(data).values
    R = Z.T @ Z / data.n
    np.fill_diagonal(R, 1.0)
    return DenseCovariance(R, n=data.n)


def _parse_rows(path, what: str) -> list[list[float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, fields in enumerate(reader, start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            try:
                values = [float(f) for f in fields]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise DataError(f"{path}: line {lineno}: non-numeric {what} field")
            rows.append((lineno, values))
    if not rows:
        raise DataError(f"{path}: no {what} rows")
    width = len(rows[0][1])
    for lineno, values in rows:
        if len(values) != width:
            raise DataError(
                f"{path}: line {lineno}: expected {width} fields, got {len(values)}"
            )
        for col, v in enumerate(values):
            if not np.isfinite(v):
                raise DataError(f"{path}: line {lineno}, column {col}: non-finite value")
    return [values for _, values in rows]


def read_data_csv(path) -> DataMatrix:
    """One sample per line, p numeric fields, optional single header line."""
    return DataMatrix(np.array(_parse_rows(path, "data")))


def read_labels_csv(path) -> np.ndarray:
    """Single-column labels over {-1, 1} or {0, 1}; 0 is mapped to -1."""
    rows = _parse_rows(path, "label")
    if len(rows[0]) != 1:
        raise DataError(f"{path}: labels must be a single column")
    y = np.array([r[0] for r in rows])
    if not np.all(np.isin(y, (-1, 0, 1))):
        raise DataError(f"{path}: labels must be in {{-1, 1}} or {{0, 1}}")
    if np.any(y == 0) and np.any(y == -1):
        raise DataError(f"{path}: labels mix 0 and -1")
    y[y == 0] = -1
    return y.astype(int)

import struct

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pcscreen.covsource import (
    DataError,
    DataMatrix,
    DenseCovariance,
    LabeledData,
    StoreFormatError,
    empirical_covariance,
    open_store,
    pooled_correlation,
    pooled_sd,
    pooled_standardized,
    read_data_csv,
    read_labels_csv,
    write_store,
)
from pcscreen.pcs import PcsConfig, estimate_row
from pcscreen.simlab import tridiagonal, sample_gaussian


def test_covariance_of_identity_like_samples():
    cov = empirical_covariance(DataMatrix([[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_array_equal(cov.to_dense(), [[0.5, 0.0], [0.0, 0.5]])


def test_covariance_hand_computed():
    # inner products 5, 4, 5 over n = 3
    cov = empirical_covariance(DataMatrix([[1.0, 2.0], [2.0, 1.0], [0.0, 0.0]]))
    np.testing.assert_allclose(cov.to_dense(), [[5 / 3, 4 / 3], [4 / 3, 5 / 3]], rtol=1e-15)


def test_single_sample_rejected():
    with pytest.raises(DataError, match="n >= 2 required"):
        DataMatrix([[1.0, 2.0]])


def test_non_finite_entry_located():
    with pytest.raises(DataError, match="row 1, column 0"):
        DataMatrix([[1.0, 2.0], [np.nan, 1.0]])


def test_labeled_data_needs_two_per_class():
    with pytest.raises(DataError, match="n1=1"):
        LabeledData(DataMatrix(np.ones((4, 2)) + np.eye(4, 2)), np.array([1, -1, -1, -1]))


def test_pooled_correlation_hand_computed():
    # class means (+): (2, 1), (-): (-2, 3); centered columns (-1, 1, 1, -1), (1, -1, -2, 2)
    X = np.array([[1.0, 2.0], [3.0, 0.0], [-1.0, 1.0], [-3.0, 5.0]])
    data = LabeledData(DataMatrix(X), np.array([1, 1, -1, -1]))
    R = pooled_correlation(data).to_dense()
    np.testing.assert_allclose(R, [[1.0, -6 / np.sqrt(40)], [-6 / np.sqrt(40), 1.0]], rtol=1e-14)
    np.testing.assert_allclose(pooled_sd(data), [np.sqrt(2.0), np.sqrt(5.0)], rtol=1e-15)


def test_pooled_correlation_rejects_constant_feature():
    X = np.array([[1.0, 2.0], [1.0, 0.0], [1.0, 1.0], [1.0, 5.0]])
    with pytest.raises(DataError, match="zero pooled standard deviation at feature 0"):
        pooled_correlation(LabeledData(DataMatrix(X), np.array([1, 1, -1, -1])))


def test_pooled_standardized_gram_is_correlation(rng):
    X = rng.standard_normal((30, 6))
    data = LabeledData(DataMatrix(X), np.repeat([1, -1], 15))
    Z = pooled_standardized(data).values
    R = pooled_correlation(data).to_dense()
    np.testing.assert_allclose(Z.T @ Z / 30, R, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(4, 12), st.integers(2, 8)),
              elements=st.integers(-200, 200).map(lambda k: k / 4)))
def test_builders_symmetric_with_unit_correlation_diagonal(X):
    n = X.shape[0]
    assume(np.all(np.any(X != 0, axis=0)))
    cov = empirical_covariance(DataMatrix(X)).to_dense()
    np.testing.assert_allclose(cov, cov.T, atol=1e-12 * max(1.0, np.abs(cov).max()))
    labels = np.where(np.arange(n) % 2 == 0, 1, -1)
    data = LabeledData(DataMatrix(X), labels)
    try:
        R = pooled_correlation(data).to_dense()
    except DataError:
        return
    assert np.all(np.abs(np.diag(R) - 1.0) <= 1e-12)
    np.testing.assert_allclose(R, R.T, atol=1e-12)


def test_store_round_trip_is_byte_exact(tmp_path, rng):
    A = rng.standard_normal((5, 5))
    A = A @ A.T + np.eye(5)
    path = write_store(DenseCovariance(A), tmp_path / "c.pcs1")
    raw = path.read_bytes()
    assert raw[:4] == b"PCS1"
    assert struct.unpack("<IQ", raw[4:16]) == (1, 5)
    assert len(raw) == 16 + 8 * 25
    store = open_store(path, n=10)
    for i in range(5):
        assert store.row(i).tobytes() == A[i].astype("<f8").tobytes()
    np.testing.assert_array_equal(store.diagonals, np.diag(A))
    store.close()


def test_store_row_bounds_and_telemetry(tmp_path):
    path = write_store(DenseCovariance(np.eye(3) * 2), tmp_path / "c.pcs1")
    with open_store(path, n=4) as store:
        with pytest.raises(IndexError):
            store.row(3)
        store.row(0)
        store.row(0)
        store.row(2)
        assert store.total_fetches == 3
        assert store.fetch_counts[0] == 2


@pytest.mark.parametrize("mutate, message", [
    (lambda b: b"XXXX" + b[4:], "bad magic"),
    (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], "unsupported version"),
    (lambda b: b[:-8], "does not match"),
    (lambda b: b[:10], "truncated header"),
])
def test_store_format_errors(tmp_path, mutate, message):
    good = write_store(DenseCovariance(np.eye(3)), tmp_path / "good.pcs1").read_bytes()
    bad = tmp_path / "bad.pcs1"
    bad.write_bytes(mutate(good))
    with pytest.raises(StoreFormatError, match=message):
        open_store(bad, n=3)


def test_store_backed_builder_matches_dense(tmp_path, rng):
    data = DataMatrix(rng.standard_normal((20, 7)))
    dense = empirical_covariance(data)
    stored = empirical_covariance(data, store=tmp_path / "c.pcs1")
    assert stored.n == 20
    assert open_store(tmp_path / "c.pcs1").n == 20  # from the sidecar
    for i in range(7):
        assert stored.row(i).tobytes() == dense.row(i).tobytes()


def test_store_row_fetches_bounded_by_step_cap(tmp_path):
    p, L = 200, 15
    data = sample_gaussian(np.linalg.inv(tridiagonal(p, 0.4)), 100, seed=3)
    store = empirical_covariance(data, store=tmp_path / "c.pcs1")
    store.reset_telemetry()
    estimate_row(store, 50, PcsConfig(q=1.5, delta=0.0, max_steps=L))
    assert len(store.fetch_counts) <= L + 1
    assert set(store.fetch_counts) >= {50}


def test_read_csv_with_header_and_errors(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(read_data_csv(f).values, [[1, 2], [3, 4]])
    f.write_text("1,2\n3\n")
    with pytest.raises(DataError, match="line 2: expected 2 fields"):
        read_data_csv(f)
    f.write_text("1,2\n3,x\n")
    with pytest.raises(DataError, match="line 2: non-numeric"):
        read_data_csv(f)


def test_labels_zero_maps_to_minus_one(tmp_path):
    f = tmp_path / "y.csv"
    f.write_text("1\n0\n1\n0\n")
    np.testing.assert_array_equal(read_labels_csv(f), [1, -1, 1, -1])
    f.write_text("1\n2\n")
    with pytest.raises(DataError):
        read_labels_csv(f)

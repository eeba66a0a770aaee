import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcscreen.covsource import DataError
from pcscreen.sparse import SparseSymmetricMatrix, symmetrize_rows


def test_dense_round_trip(rng):
    A = rng.standard_normal((6, 6))
    A = np.where(np.abs(A) > 0.8, A, 0.0)
    A = A + A.T
    S = SparseSymmetricMatrix.from_dense(A)
    np.testing.assert_array_equal(S.to_dense(), A)
    assert S.nnz == np.count_nonzero(A)
    np.testing.assert_allclose(S.matvec(np.arange(6.0)), A @ np.arange(6.0))


def test_file_round_trip_is_exact(tmp_path, rng):
    S = SparseSymmetricMatrix(4, [0, 0, 1, 3], [0, 2, 1, 3], rng.standard_normal(4))
    S.write(tmp_path / "m.trip")
    assert (tmp_path / "m.trip").read_text().startswith("p 4 format pcs-triplet-v1\n")
    assert SparseSymmetricMatrix.read(tmp_path / "m.trip") == S


def test_bad_header_rejected(tmp_path):
    (tmp_path / "m.trip").write_text("dimension 4\n")
    with pytest.raises(DataError, match="bad triplet header"):
        SparseSymmetricMatrix.read(tmp_path / "m.trip")


def test_invalid_triplets():
    with pytest.raises(ValueError, match="i <= j"):
        SparseSymmetricMatrix(3, [2], [1], [1.0])
    with pytest.raises(ValueError, match="duplicate"):
        SparseSymmetricMatrix(3, [0, 0], [1, 1], [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.data())
def test_symmetrize_rows_is_half_sum(p, data):
    A = np.zeros((p, p))
    entries = {}
    for i in range(p):
        others = data.draw(st.lists(st.integers(0, p - 1).filter(lambda j: j != i), unique=True, max_size=4))
        vals = data.draw(st.lists(st.floats(-5, 5, allow_nan=False), min_size=len(others), max_size=len(others)))
        diag = data.draw(st.floats(0.1, 5))
        A[i, i] = diag
        A[i, others] = vals
        entries[i] = (diag, list(zip(others, vals)))
    S = symmetrize_rows(p, entries).to_dense()
    np.testing.assert_allclose(S, (A + A.T) / 2, atol=1e-15)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcscreen import hct
from pcscreen.covsource import DataError, DataMatrix, LabeledData
from pcscreen.simlab import ClassSpec, ModelSpec, sample_two_class, tridiagonal
from pcscreen.sparse import SparseSymmetricMatrix
from pcscreen.tuning import fit_hct


def two_class(X, labels):
    return LabeledData(DataMatrix(np.asarray(X, dtype=float)), np.asarray(labels))


def test_t_score_hand_computed():
    # class means +1 / -1 with pooled sd 1: within-class deviations +-1/sqrt(2)
    a = 1 / math.sqrt(2)
    X = [[1 + a, 0.0], [1 - a, 1.0], [-1 + a, 2.0], [-1 - a, 4.0]]
    z = hct.t_scores(two_class(X, [1, 1, -1, -1]))
    assert z[0] == pytest.approx(2.0, rel=1e-14)


def test_t_scores_zero_for_equal_means():
    X = [[1.0, 2.0], [3.0, 0.0], [3.0, 0.0], [1.0, 2.0]]
    np.testing.assert_array_equal(hct.t_scores(two_class(X, [1, 1, -1, -1])), [0.0, 0.0])


def test_t_scores_reject_constant_feature():
    with pytest.raises(DataError, match="feature 1"):
        hct.t_scores(two_class([[1.0, 5.0], [2.0, 5.0], [0.0, 5.0], [3.0, 5.0]], [1, 1, -1, -1]))


def test_normalize():
    np.testing.assert_array_equal(hct.empirical_null_normalize([-1.0, 1.0]), [-1.0, 1.0])
    with pytest.raises(ValueError, match="degenerate score vector"):
        hct.empirical_null_normalize([2.0, 2.0, 2.0])
    z = hct.empirical_null_normalize(np.random.default_rng(0).standard_normal(50))
    np.testing.assert_allclose(hct.empirical_null_normalize(z), z, atol=1e-12)
    assert z.mean() == pytest.approx(0, abs=1e-14) and z.std() == pytest.approx(1, rel=1e-14)


def test_innovated_transform():
    z = np.ones(6)
    np.testing.assert_array_equal(hct.innovated_transform(SparseSymmetricMatrix.identity(6), z), z)
    tri = SparseSymmetricMatrix.from_dense(tridiagonal(6, 0.3))
    out = hct.innovated_transform(tri, z)
    np.testing.assert_allclose(out[1:-1], 1 + 2 * 0.3, rtol=1e-15)
    np.testing.assert_allclose(out[[0, -1]], 1.3, rtol=1e-15)
    np.testing.assert_array_equal(hct.innovated_transform(tri, np.zeros(6)), np.zeros(6))


def test_hc_functional_worked_example():
    pv = np.array([0.001, 0.02] + [0.5 + 0.05 * k for k in range(8)])
    j, hc = hct.hc_functional(pv, 0.2)
    assert len(hc) == 2
    assert hc[0] == pytest.approx(0.099 / 0.3, rel=1e-12)
    assert hc[1] == pytest.approx(0.18 / 0.4, rel=1e-12)
    assert j == 2


def test_uniform_pvalues_tie_to_first():
    p = 20
    j, hc = hct.hc_functional(np.arange(1, p + 1) / p, 0.5)
    np.testing.assert_array_equal(hc, 0.0)
    assert j == 1


def test_search_range_clamps():
    assert hct.hc_search_range(4, 0.2) == 1
    assert hct.hc_search_range(10, 0.2) == 2
    assert hct.hc_search_range(100, 0.2) == 20


def test_nonpositive_diagonal_rejected():
    with pytest.raises(ValueError, match="feature 1"):
        hct.hc_threshold(np.ones(3), np.array([1.0, 0.0, 1.0]))


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(2, 60))
def test_pvalues_and_permutation_invariance(seed, p):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(p) * 2
    d = rng.uniform(0.5, 2, p)
    pv = hct.p_values(z, d)
    assert np.all((pv > 0) & (pv <= 1))
    perm = rng.permutation(p)
    assert hct.hc_threshold(z, d) == hct.hc_threshold(z[perm], d[perm])


@pytest.fixture(scope="module")
def trained():
    spec = ClassSpec(ModelSpec("tridiag", 90), epsilon_p=0.2, tau_p=5.0, seed=3)
    data, _ = sample_two_class(spec, 120, seed=3)
    return data, fit_hct(data, "pcs", q=0.3)


def test_weight_invariants(trained):
    _, model = trained
    w, zt, t = model.weights, model.z_tilde, model.hc_threshold
    assert set(np.unique(w)) <= {-1.0, 0.0, 1.0}
    np.testing.assert_array_equal(w != 0, np.abs(zt) >= t)
    np.testing.assert_array_equal(np.sign(w[w != 0]), np.sign(zt[w != 0]))
    if len(np.unique(np.abs(zt))) == zt.size:
        assert np.count_nonzero(w) == model.j_hat


def test_single_strong_feature_decides():
    rng = np.random.default_rng(2)
    y = np.array([1, 1, 1, -1, -1, -1])
    X = np.column_stack([5.0 * y + rng.uniform(-0.5, 0.5, 6), rng.standard_normal((6, 4))])
    model = hct.train(two_class(X, y), SparseSymmetricMatrix.identity(5))
    np.testing.assert_array_equal(model.weights, [1, 0, 0, 0, 0])
    assert hct.classify(model, [[1.0, 0, 0, 0, 0]])[0] == 1
    assert hct.classify(model, [[-1.0, 0, 0, 0, 0]])[0] == -1


def test_label_flip_antisymmetry(trained):
    data, model = trained
    flipped = LabeledData(DataMatrix(-data.X), -data.labels)
    model_f = hct.train(flipped, model.omega)
    test = np.random.default_rng(9).standard_normal((25, data.p))
    np.testing.assert_array_equal(hct.classify(model_f, -test), -hct.classify(model, test))


def test_scaling_precision_keeps_labels(trained):
    data, model = trained
    scaled = hct.train(data, model.omega.scaled(3.0))
    test = np.random.default_rng(10).standard_normal((40, data.p))
    np.testing.assert_array_equal(hct.classify(scaled, test), hct.classify(model, test))


def test_zero_discriminant_maps_to_plus_one(trained):
    _, model = trained
    midpoint = (model.mu_plus + model.mu_minus) / 2
    assert hct.discriminant(model, midpoint)[0] == 0
    assert hct.classify(model, midpoint)[0] == 1


def test_dimension_mismatch(trained):
    _, model = trained
    with pytest.raises(DataError, match="expects p=90 features, got p=5"):
        hct.classify(model, np.zeros(5))


def test_model_json_round_trip(tmp_path, trained):
    data, model = trained
    model.save(tmp_path / "m.json")
    back = hct.HctModel.load(tmp_path / "m.json")
    assert back.omega == model.omega
    for name in ("mu_plus", "mu_minus", "pooled_sd", "z", "z_star", "z_tilde", "weights"):
        np.testing.assert_array_equal(getattr(back, name), getattr(model, name))
    assert back.hc_threshold == model.hc_threshold and back.alpha0 == model.alpha0
    np.testing.assert_array_equal(hct.classify(back, data.X), hct.classify(model, data.X))


def test_malformed_model(tmp_path):
    (tmp_path / "m.json").write_text('{"format": "other"}')
    with pytest.raises(DataError, match="unknown model format"):
        hct.HctModel.load(tmp_path / "m.json")


def test_strong_signal_separates(trained):
    data, model = trained
    assert hct.error_rate(model, data) < 0.1

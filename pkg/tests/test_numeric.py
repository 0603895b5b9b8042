import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from retailseg.errors import ConfigError, DataError
from retailseg.numeric import (
    FeatureMatrix,
    Scaling,
    covariance_matrix,
    eigen_symmetric,
    inverse_transform,
    minmax_scale,
    pca_fit_transform,
    scale,
    standard_scale,
)


def test_minmax_examples():
    assert minmax_scale([[0.0], [5.0], [10.0]]).data[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert minmax_scale([[3.0], [3.0], [3.0]]).data[:, 0].tolist() == [0.0, 0.0, 0.0]


def test_standard_examples():
    assert standard_scale([[1.0], [2.0], [3.0]]).data[:, 0].tolist() == [-1.0, 0.0, 1.0]
    assert standard_scale([[7.0], [7.0]]).data[:, 0].tolist() == [0.0, 0.0]


def test_random_standardization_moments():
    X = np.random.default_rng(1).normal(5, 3, size=(100, 3))
    Z = standard_scale(X).data
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-12)
    assert np.all(np.abs(Z.std(axis=0, ddof=1) - 1) < 1e-12)


@pytest.mark.parametrize("kind", ["minmax", "zscore", "raw"])
def test_inverse_round_trip(kind):
    rng = np.random.default_rng(2)
    for _ in range(20):
        X = rng.normal(0, 100, size=(int(rng.integers(2, 30)), 3))
        X[:, 2] = 4.0  # one constant column
        back = inverse_transform(scale(X, kind)).data
        np.testing.assert_allclose(back, X, atol=1e-12 * max(1, np.abs(X).max()))


def test_scaling_serialises():
    s = minmax_scale([[0.0, 1.0], [2.0, 1.0]]).scaling
    assert Scaling.from_dict(s.to_dict()) == s
    assert s.to_dict() == {"kind": "minmax", "offset": [0.0, 1.0], "scale": [2.0, 0.0]}


def test_non_finite_rejected():
    with pytest.raises(DataError):
        minmax_scale([[1.0], [np.nan]])
    with pytest.raises(DataError):
        standard_scale([[np.inf], [1.0]])
    with pytest.raises(DataError):
        FeatureMatrix(np.zeros((0, 2)), ("a", "b"))
    with pytest.raises(ConfigError):
        scale([[1.0]], "robust")


def test_covariance_examples():
    assert covariance_matrix([[1, 2], [3, 6], [5, 10]]).tolist() == [[4.0, 8.0], [8.0, 16.0]]
    C = covariance_matrix([[1, 5, 1], [2, 5, 2], [4, 5, 4]])
    assert np.all(C[1] == 0) and np.all(C[:, 1] == 0)
    assert C[0, 2] == C[0, 0]
    with pytest.raises(DataError):
        covariance_matrix([[1, 2]])


def test_covariance_matches_numpy():
    X = np.random.default_rng(3).normal(size=(50, 4))
    np.testing.assert_allclose(covariance_matrix(X), np.cov(X, rowvar=False), atol=1e-14)


def test_eigen_examples():
    vals, vecs = eigen_symmetric(np.eye(2))
    assert vals.tolist() == [1.0, 1.0]
    vals, vecs = eigen_symmetric([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(vals, [3.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(vecs[:, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-14)
    np.testing.assert_allclose(vecs[:, 1], np.array([1, -1]) / np.sqrt(2), atol=1e-14)
    with pytest.raises(DataError):
        eigen_symmetric([[1.0, 2.0], [0.0, 1.0]])
    assert eigen_symmetric(np.zeros((3, 3)))[0].tolist() == [0.0, 0.0, 0.0]


def test_eigen_reconstruction_and_numpy_oracle():
    rng = np.random.default_rng(4)
    for _ in range(30):
        B = rng.normal(size=(5, 5))
        C = B + B.T
        vals, V = eigen_symmetric(C)
        np.testing.assert_allclose(V @ np.diag(vals) @ V.T, C, atol=1e-8)
        np.testing.assert_allclose(vals, np.sort(np.linalg.eigvalsh(C))[::-1], atol=1e-10)
        np.testing.assert_allclose(V.T @ V, np.eye(5), atol=1e-10)
        for i in range(5):
            assert V[np.argmax(np.abs(V[:, i])), i] > 0


def test_pca_axis_aligned():
    X = np.array([[x, 0.0] for x in (-2.0, -1.0, 0.0, 3.0)])
    model, scores = pca_fit_transform(X, 2)
    assert np.allclose(np.abs(model.components[0]), [1.0, 0.0])
    assert model.eigenvalues[1] == 0.0
    assert scores.columns == ("P1", "P2")


def test_pca_scores_diagonal_covariance():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(200, 4)) @ rng.normal(size=(4, 4))
    model, scores = pca_fit_transform(X, 4)
    np.testing.assert_allclose(np.cov(scores.data, rowvar=False), np.diag(model.eigenvalues), atol=1e-8)
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(4), atol=1e-8)
    np.testing.assert_allclose(model.inverse(scores.data), X, atol=1e-8)
    assert model.explained_variance_ratio.sum() <= 1 + 1e-10


def test_pca_k_range_and_row_ids():
    fm = FeatureMatrix.from_array(np.arange(12.0).reshape(6, 2) ** 2, row_ids=list("abcdef"))
    with pytest.raises(ConfigError):
        pca_fit_transform(fm, 0)
    with pytest.raises(ConfigError):
        pca_fit_transform(fm, 3)
    _, scores = pca_fit_transform(fm, 1)
    assert scores.row_ids == tuple("abcdef")


symmetric = st.integers(1, 6).flatmap(
    lambda d: arrays(np.float64, (d, d), elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))
).map(lambda B: B + B.T)


@settings(max_examples=100, deadline=None)
@given(symmetric)
def test_eigen_residual_property(C):
    vals, V = eigen_symmetric(C)
    norm = np.linalg.norm(C)
    for i in range(len(vals)):
        assert np.linalg.norm(C @ V[:, i] - vals[i] * V[:, i]) <= 1e-8 * norm + 1e-300
    assert np.all(np.diff(vals) <= 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40).flatmap(lambda n: arrays(
    np.float64, (n, 3), elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))))
def test_covariance_psd_and_trace_conserved(X):
    C = covariance_matrix(X)
    assert np.array_equal(C, C.T)
    vals, _ = eigen_symmetric(C)
    scale_ = max(1.0, np.trace(C))
    assert vals.min() >= -1e-10 * scale_
    assert abs(vals.sum() - np.trace(C)) <= 1e-10 * scale_

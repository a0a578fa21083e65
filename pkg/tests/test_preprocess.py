import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import ortho_group

from agw import distance_matrix, knn_geodesic, pairwise_distances, unit_normalize
from agw.preprocess import parse_metric


def test_euclidean_example():
    assert pairwise_distances([[0.0], [3.0]]).tolist() == [[0, 3], [3, 0]]


@pytest.mark.parametrize("X, expected", [
    ([[1.0, 0.0], [0.0, 1.0]], [[0, 1], [1, 0]]),
    ([[1.0, 0.0], [2.0, 0.0]], [[0, 0], [0, 0]]),
])
def test_cosine_examples(X, expected):
    assert np.allclose(pairwise_distances(X, "cosine"), expected, atol=1e-15)


def test_cosine_zero_row_is_maximally_dissimilar():
    D = pairwise_distances([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], "cosine")
    assert D[0].tolist() == [0.0, 1.0, 1.0]
    assert D[:, 0].tolist() == [0.0, 1.0, 1.0]
    assert D[1, 2] == pytest.approx(0, abs=1e-15)


def test_unknown_metric():
    with pytest.raises(ValueError):
        pairwise_distances([[0.0], [1.0]], "manhattan")
    for spec in ("knn", "knn:x", "knn:3:hamming", "knn:3:euclidean:extra"):
        with pytest.raises(ValueError):
            parse_metric(spec)


def test_parse_metric():
    assert parse_metric("cosine") == ("cosine", None, None)
    assert parse_metric("knn:5") == ("knn", 5, "euclidean")
    assert parse_metric("knn:2:cosine") == ("knn", 2, "cosine")


@given(st.integers(0, 2**32 - 1))
def test_euclidean_isometry_invariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rng.integers(2, 15), 4))
    Q = ortho_group.rvs(4, random_state=int(seed % 2**31))
    Y = X @ Q.T + rng.normal(size=4) * 10
    assert np.abs(pairwise_distances(X) - pairwise_distances(Y)).max() <= 1e-10


def test_knn_colinear_chain():
    G = knn_geodesic([[0.0], [1.0], [2.0]], k=1)
    assert np.allclose(G, [[0, 0.5, 1], [0.5, 0, 0.5], [1, 0.5, 0]], atol=1e-15)


def test_knn_complete_graph_is_normalized_distance(rng):
    X = rng.normal(size=(9, 3))
    D = pairwise_distances(X)
    # every edge is present, and straight lines are shortest in Euclidean space
    assert np.abs(knn_geodesic(X, k=8) - D / D.max()).max() <= 1e-12


def test_knn_disconnected_clusters_are_repaired(rng, caplog):
    X = np.vstack([rng.normal(size=(5, 2)), 100 + rng.normal(size=(5, 2))])
    with caplog.at_level("INFO", logger="agw.preprocess"):
        G = knn_geodesic(X, k=1)
    assert np.all(np.isfinite(G))
    assert "doubling k" in caplog.text


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.sampled_from(["euclidean", "cosine"]))
def test_knn_output_is_a_distance_matrix(seed, k, base):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(8, 3))
    G = knn_geodesic(X, k, base)
    assert np.array_equal(G, G.T)
    assert not np.diag(G).any()
    assert G.min() >= 0
    assert G.max() == 1.0


def test_knn_keeps_zero_weight_edges():
    # duplicated points are at distance 0 yet adjacent
    G = knn_geodesic([[0.0], [0.0], [1.0]], k=1)
    assert np.all(np.isfinite(G))
    assert G[0, 1] == 0.0


@pytest.mark.parametrize("k", [0, 3])
def test_knn_rejects_k(k):
    with pytest.raises(ValueError):
        knn_geodesic([[0.0], [1.0], [2.0]], k=k)


def test_knn_needs_two_points():
    with pytest.raises(ValueError):
        knn_geodesic([[0.0]], k=1)


def test_distance_matrix_dispatch(rng):
    X = rng.normal(size=(6, 2))
    assert np.array_equal(distance_matrix(X, "euclidean"), pairwise_distances(X))
    assert np.array_equal(distance_matrix(X, "knn:2"), knn_geodesic(X, 2))


def test_unit_normalize_examples():
    assert np.allclose(unit_normalize([[3.0, 4.0]]), [[0.6, 0.8]])
    assert unit_normalize([[0.0, 0.0], [1.0, 0.0]])[0].tolist() == [0.0, 0.0]


@given(st.integers(0, 2**32 - 1))
def test_unit_normalize_norms(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(7, 3)) * rng.uniform(0.01, 100)
    assert np.abs(np.linalg.norm(unit_normalize(X), axis=1) - 1).max() <= 1e-12

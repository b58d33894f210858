import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gaussian_blobs, random_points
from oracles import ab_fit_oracle, naive_knn
from topiclab.errors import ParameterError
from topiclab.umap import (
    UmapParams,
    fit_ab,
    fuzzy_simplicial_set,
    knn_graph,
    optimize_layout,
    smooth_knn,
    umap_reduce,
)


def test_knn_line_points():
    X = np.array([[0.0], [1.0], [3.0]])
    idx, dist = knn_graph(X, 1)
    assert idx.ravel().tolist() == [1, 0, 1]
    assert dist.ravel().tolist() == [1.0, 1.0, 2.0]


def test_knn_duplicates_allowed():
    X = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]])
    idx, dist = knn_graph(X, 1)
    assert dist[0, 0] == 0.0 and idx[0, 0] == 1
    assert dist[1, 0] == 0.0 and idx[1, 0] == 0


def test_knn_k_too_large():
    with pytest.raises(ParameterError):
        knn_graph(np.zeros((3, 2)), 3)


@pytest.mark.parametrize("metric", ["euclidean", "cosine"])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_knn_matches_brute_force(metric, seed):
    X = random_points(seed, 50, 8)
    if metric == "cosine":
        X = X + 6.0  # keep away from the origin
    idx, dist = knn_graph(X, 7, metric)
    oidx, odist = naive_knn(X, 7, metric)
    assert np.array_equal(idx, oidx)
    assert np.allclose(dist, odist, atol=1e-9)
    assert np.all(np.diff(dist, axis=1) >= -1e-12)


def test_smooth_knn_closed_form():
    # sum over [1,2,3] with rho=1: 1 + x + x^2 = log2(3), x = exp(-1/sigma)
    rho, sigma = smooth_knn(np.array([[1.0, 2.0, 3.0]]), 3)
    x = (math.sqrt(1 + 4 * (math.log2(3) - 1)) - 1) / 2
    expected = -1.0 / math.log(x)
    assert rho[0] == 1.0
    assert sigma[0] == pytest.approx(expected, abs=1e-3)


def test_smooth_knn_equal_distances_clamps():
    rho, sigma = smooth_knn(np.array([[2.0, 2.0, 2.0, 2.0]]), 4)
    assert rho[0] == 2.0
    assert sigma[0] == pytest.approx(1e-3 * 2.0)


def test_smooth_knn_extreme_gap_clamps():
    rho, sigma = smooth_knn(np.array([[1.0, 1e6]]), 2)
    assert sigma[0] == pytest.approx(1e-3 * (1.0 + 1e6) / 2.0)


def test_smooth_knn_all_zero_fallback():
    rho, sigma = smooth_knn(np.zeros((1, 3)), 3)
    assert rho[0] == 0.0 and sigma[0] == 1.0


def test_fuzzy_union_weights():
    # one point pair with both directions present: 0.6 + 0.2 - 0.12 = 0.68
    indices = np.array([[1], [0]])
    rho = np.array([0.0, 0.0])
    # choose distances/sigmas so exp(-d/sigma) gives 0.6 and 0.2
    d1, d2 = -math.log(0.6), -math.log(0.2)
    distances = np.array([[d1], [d2]])
    sigma = np.array([1.0, 1.0])
    graph = fuzzy_simplicial_set(indices, distances, rho, sigma)
    assert graph.n_edges == 1
    assert graph.weights[0] == pytest.approx(0.68)


def test_fuzzy_nearest_neighbor_weight_one():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [7.0, 0.0]])
    idx, dist = knn_graph(X, 2)
    rho, sigma = smooth_knn(dist, 2)
    graph = fuzzy_simplicial_set(idx, dist, rho, sigma)
    weight = {(h, t): w for h, t, w in zip(graph.heads, graph.tails, graph.weights)}
    assert weight[(0, 1)] == pytest.approx(1.0)  # d == rho in both directions
    assert np.all(graph.weights > 0) and np.all(graph.weights <= 1.0)


def test_fuzzy_one_directional_edge_kept():
    indices = np.array([[1], [2], [1]])
    distances = np.array([[math.log(2)], [0.5], [0.5]])
    rho = np.zeros(3)
    sigma = np.ones(3)
    graph = fuzzy_simplicial_set(indices, distances, rho, sigma)
    weight = {(h, t): w for h, t, w in zip(graph.heads, graph.tails, graph.weights)}
    assert weight[(0, 1)] == pytest.approx(0.5)  # no reverse edge: union with 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 25))
def test_fuzzy_graph_symmetric_range_property(seed, n):
    X = random_points(seed, n, 3)
    k = min(4, n - 1)
    idx, dist = knn_graph(X, k)
    rho, sigma = smooth_knn(dist, k)
    graph = fuzzy_simplicial_set(idx, dist, rho, sigma)
    assert np.all(graph.heads < graph.tails)  # canonical undirected storage
    assert np.all((graph.weights > 0) & (graph.weights <= 1.0))
    degree = np.zeros(n)
    np.add.at(degree, graph.heads, 1)
    np.add.at(degree, graph.tails, 1)
    assert np.all(degree >= 1)


def test_fit_ab_matches_independent_oracle():
    for min_dist in (0.0, 0.09):
        a, b = fit_ab(min_dist, 1.0)
        oa, ob, orms = ab_fit_oracle(min_dist, 1.0)
        assert a == pytest.approx(oa, abs=0.02)
        assert b == pytest.approx(ob, abs=0.02)
        xv = np.linspace(0, 3, 300)
        yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist)))
        rms = np.sqrt(np.mean((1 / (1 + a * xv ** (2 * b)) - yv) ** 2))
        assert rms <= orms + 1e-6


def test_fit_ab_expected_values_min_dist_zero():
    a, b = fit_ab(0.0, 1.0)
    assert a == pytest.approx(1.93, abs=0.01)
    assert b == pytest.approx(0.79, abs=0.01)


def test_fit_ab_near_spread_flagged():
    with pytest.raises(ParameterError):
        fit_ab(0.95, 1.0)


def test_optimize_layout_deterministic():
    X = random_points(3, 40, 5)
    params = UmapParams(n_neighbors=5, n_components=2, min_dist=0.1,
                        metric="euclidean", n_epochs=50, seed=9)
    p1 = umap_reduce(X, params)
    p2 = umap_reduce(X, params)
    assert p1.coords.tobytes() == p2.coords.tobytes()
    assert p1.params == params and p1.seed == 9


def test_zero_epochs_returns_init():
    X = random_points(4, 20, 6)
    params = UmapParams(n_neighbors=4, n_components=6, min_dist=0.0,
                        metric="euclidean", n_epochs=0, seed=5)
    proj = umap_reduce(X, params)
    assert proj.coords.shape == (20, 6)
    assert np.all((proj.coords >= -10) & (proj.coords < 10))


def blob_purity(coords, labels):
    centers = np.stack([coords[labels == b].mean(0) for b in np.unique(labels)])
    d = np.linalg.norm(coords[:, None, :] - centers[None, :, :], axis=2)
    return float(np.mean(np.argmin(d, axis=1) == labels))


def neighbor_preservation(X, coords, k=10):
    from topiclab.umap import knn_graph as knng

    before, _ = knng(X, k, "euclidean")
    after, _ = knng(coords, k, "euclidean")
    overlap = [
        len(set(before[i]) & set(after[i])) / k for i in range(len(X))
    ]
    return float(np.mean(overlap))


def test_blob_structure_recovered():
    centers = random_points(77, 3, 20, -10, 10)
    X, labels = gaussian_blobs(2, centers, 100, scale=0.5)
    params = UmapParams(n_neighbors=15, n_components=2, min_dist=0.1,
                        metric="euclidean", n_epochs=200, seed=11)
    proj = umap_reduce(X, params)
    assert blob_purity(proj.coords, labels) >= 0.9


def test_neighbor_preservation_on_small_blobs():
    # small blobs make 10-NN retention meaningful (k spans half a blob)
    centers = random_points(77, 8, 10, -10, 10)
    X, _ = gaussian_blobs(2, centers, 20, scale=0.5)
    params = UmapParams(n_neighbors=15, n_components=2, min_dist=0.1,
                        metric="euclidean", n_epochs=300, seed=11)
    proj = umap_reduce(X, params)
    assert neighbor_preservation(X, proj.coords) >= 0.6


def test_umap_reduce_accepts_table_params():
    # hyperparameters seen in the evaluation tables must be accepted verbatim
    params = UmapParams(n_neighbors=100, n_components=2, min_dist=0.09, seed=0)
    assert (params.n_neighbors, params.n_components, params.min_dist) == (100, 2, 0.09)


def test_umap_params_validation():
    with pytest.raises(ParameterError):
        UmapParams(n_neighbors=1)
    with pytest.raises(ParameterError):
        UmapParams(n_components=0)
    with pytest.raises(ParameterError):
        UmapParams(min_dist=1.0, spread=1.0)
    with pytest.raises(ParameterError):
        umap_reduce(np.zeros((5, 2)), UmapParams(n_neighbors=5))

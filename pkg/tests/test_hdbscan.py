import numpy as np
import pytest

from conftest import gaussian_blobs, random_points
from oracles import (
    exhaustive_mst_weight,
    kruskal_mst,
    labeling_to_partition,
    naive_hdbscan,
    partitions_equal,
)
from topiclab.errors import ParameterError
from topiclab.hdbscan import (
    CondensedTree,
    HdbscanParams,
    build_mst,
    condense_tree,
    core_distances,
    hdbscan_cluster,
    mutual_reachability,
    mutual_reachability_matrix,
    select_clusters,
)
from topiclab._distance import pairwise_distances


def test_core_distances_line():
    X = np.array([[0.0], [1.0], [3.0]])
    assert core_distances(X, 1).tolist() == [1.0, 1.0, 2.0]
    assert core_distances(X, 2).tolist() == [3.0, 2.0, 3.0]


def test_core_distance_duplicates():
    X = np.array([[2.0, 2.0], [2.0, 2.0], [9.0, 9.0]])
    cores = core_distances(X, 1)
    assert cores[0] == 0.0 and cores[1] == 0.0


def test_core_distance_k_too_large():
    with pytest.raises(ParameterError):
        core_distances(np.zeros((3, 2)), 3)


def test_core_distances_match_brute_force():
    X = random_points(8, 30, 3)
    for k in (1, 3, 7):
        cores = core_distances(X, k)
        for i in range(30):
            dists = sorted(
                float(np.linalg.norm(X[i] - X[j])) for j in range(30) if j != i
            )
            assert cores[i] == pytest.approx(dists[k - 1], abs=1e-9)


def test_mutual_reachability_cases():
    assert mutual_reachability(5, 1, 2) == 5
    assert mutual_reachability(1, 4, 2) == 4
    assert mutual_reachability(3, 3, 3) == 3


def test_mreach_dominates_distance_and_is_symmetric():
    X = random_points(5, 20, 2)
    D = pairwise_distances(X)
    M = mutual_reachability_matrix(D, core_distances(X, 3))
    off = ~np.eye(20, dtype=bool)
    assert np.all(M[off] >= D[off])
    assert np.array_equal(M, M.T)


def test_mst_two_pairs():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [50.0, 0.0], [50.0, 1.0]])
    D = pairwise_distances(X)
    edges = build_mst(D)
    pairs = {(a, b) for a, b, _ in edges}
    assert (0, 1) in pairs and (2, 3) in pairs
    assert len(edges) == 3  # plus exactly one bridge


def test_mst_two_points():
    edges = build_mst(np.array([[0.0, 4.0], [4.0, 0.0]]))
    assert edges == [(0, 1, 4.0)]


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
def test_mst_weight_matches_exhaustive(n):
    X = random_points(n * 13 + 1, n, 2)
    D = pairwise_distances(X)
    weight = sum(w for _, _, w in build_mst(D))
    assert weight == pytest.approx(exhaustive_mst_weight(D), abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_mst_weight_matches_kruskal(seed):
    X = random_points(seed + 100, 25, 3)
    D = pairwise_distances(X)
    w_prim = sum(w for _, _, w in build_mst(D))
    w_kruskal = sum(w for _, _, w in kruskal_mst(D))
    assert w_prim == pytest.approx(w_kruskal, abs=1e-9)


def test_condense_equidistant_line_single_cluster():
    X = np.arange(20.0).reshape(-1, 1)
    core = core_distances(X, 2)
    M = mutual_reachability_matrix(pairwise_distances(X), core)
    tree = condense_tree(build_mst(M), min_cluster_size=5)
    assert tree.cluster_ids() == [tree.root]  # no split survives


def test_condense_two_blobs_split():
    b1, _ = gaussian_blobs(3, np.array([[0.0, 0.0]]), 10, scale=0.1)
    b2, _ = gaussian_blobs(4, np.array([[10.0, 10.0]]), 10, scale=0.1)
    X = np.vstack([b1, b2])
    M = mutual_reachability_matrix(pairwise_distances(X), core_distances(X, 2))
    tree = condense_tree(build_mst(M), min_cluster_size=3)
    assert len(tree.cluster_children(tree.root)) == 2

    labeling = select_clusters(tree, "eom")
    assert labeling.n_clusters == 2
    assert labeling.n_noise == 0
    assert np.all((labeling.probabilities >= 0) & (labeling.probabilities <= 1))


def test_condense_too_small_everything_falls_out():
    X = random_points(9, 4, 2)
    M = mutual_reachability_matrix(pairwise_distances(X), core_distances(X, 1))
    tree = condense_tree(build_mst(M), min_cluster_size=6)
    assert tree.cluster_ids() == [tree.root]
    assert len(tree.point_rows()) == 4


def test_condensed_tree_lambda_monotone():
    X = random_points(21, 40, 2)
    M = mutual_reachability_matrix(pairwise_distances(X), core_distances(X, 3))
    tree = condense_tree(build_mst(M), min_cluster_size=4)
    for parent, _, lam, _ in tree.rows:
        assert lam >= tree.birth_lambda(parent) - 1e-12


def test_select_root_only_tree_all_noise():
    tree = CondensedTree(5, [(5, p, 2.0, 1) for p in range(5)])
    labeling = select_clusters(tree, "eom")
    assert labeling.labels.tolist() == [-1] * 5


def test_eom_vs_leaf_on_hand_built_tree():
    # root(6) -> parent cluster 7 with points falling slowly (high stability),
    # then 7 splits into leaves 8 and 9 with short lives (low stability).
    rows = [
        (6, 7, 1.0, 6),
        (7, 8, 2.0, 3),
        (7, 9, 2.0, 3),
        (8, 0, 2.2, 1), (8, 1, 2.2, 1), (8, 2, 2.2, 1),
        (9, 3, 2.2, 1), (9, 4, 2.2, 1), (9, 5, 2.2, 1),
    ]
    tree = CondensedTree(6, rows)
    stab = tree.stability()
    assert stab[7] > stab[8] + stab[9]
    eom = select_clusters(tree, "eom")
    leaf = select_clusters(tree, "leaf")
    assert eom.n_clusters == 1
    assert leaf.n_clusters == 2


def test_hdbscan_two_blobs_end_to_end():
    b1, _ = gaussian_blobs(5, np.array([[0.0, 0.0]]), 10, scale=0.1)
    b2, _ = gaussian_blobs(6, np.array([[10.0, 0.0]]), 10, scale=0.1)
    X = np.vstack([b1, b2])
    labeling = hdbscan_cluster(X, HdbscanParams(3, 2, "eom"))
    assert labeling.n_clusters == 2
    assert labeling.n_noise == 0
    assert len(set(labeling.labels[:10].tolist())) == 1
    assert len(set(labeling.labels[10:].tolist())) == 1


def test_hdbscan_all_noise_when_too_small():
    X = random_points(30, 5, 2)
    labeling = hdbscan_cluster(X, HdbscanParams(min_cluster_size=6, min_samples=2))
    assert labeling.labels.tolist() == [-1] * 5


def test_hdbscan_table_params_accepted():
    HdbscanParams(min_cluster_size=15, min_samples=5, cluster_selection_method="eom")


def test_min_cluster_size_respected():
    for seed in range(5):
        X = random_points(seed, 35, 2)
        labeling = hdbscan_cluster(X, HdbscanParams(4, 2, "eom"))
        for c in range(labeling.n_clusters):
            assert np.sum(labeling.labels == c) >= 4


def test_permutation_invariance():
    X, _ = gaussian_blobs(12, np.array([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]]), 12, 0.3)
    params = HdbscanParams(4, 2, "eom")
    base = labeling_to_partition(hdbscan_cluster(X, params).labels)
    perm = np.argsort(random_points(99, len(X), 1).ravel())
    relabeled = hdbscan_cluster(X[perm], params)
    clusters = {
        frozenset(int(perm[i]) for i in members)
        for members in labeling_to_partition(relabeled.labels)[0]
    }
    noise = frozenset(int(perm[i]) for i in labeling_to_partition(relabeled.labels)[1])
    assert partitions_equal(base[0], base[1], clusters, noise)


@pytest.mark.parametrize("method", ["eom", "leaf"])
@pytest.mark.parametrize("seed", range(10))
def test_matches_naive_oracle(method, seed):
    n = 15 + (seed * 7) % 26  # 15..40
    if seed % 3 == 0:
        centers = random_points(seed + 50, 3, 2, -8, 8)
        X, _ = gaussian_blobs(seed, centers, n // 3, scale=0.6)
    else:
        X = random_points(seed, n, 2)
    mcs = 3 + seed % 4
    ms = 1 + seed % 3
    labeling = hdbscan_cluster(X, HdbscanParams(mcs, ms, method))
    ours = labeling_to_partition(labeling.labels)
    oracle = naive_hdbscan(X, mcs, ms, method)
    assert partitions_equal(ours[0], ours[1], oracle[0], oracle[1])

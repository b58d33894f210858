import numpy as np
import pytest

from conftest import gaussian_blobs, random_points
from oracles import naive_dbcv
from topiclab.dbcv import (
    apts_core_distance,
    dbcv_score,
    density_separation,
    density_sparseness,
)
from topiclab.errors import NotScorableError, ParameterError
from topiclab.hdbscan import Labeling
from topiclab.rng import Rng

TRIAD = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


def labeling_of(labels):
    labels = np.asarray(labels, dtype=np.int64)
    return Labeling(labels, np.ones(len(labels)))


def test_apts_corner():
    assert apts_core_distance(0, TRIAD, 2) == pytest.approx(1.0)


def test_apts_arm():
    assert apts_core_distance(1, TRIAD, 2) == pytest.approx((1.5 / 2) ** -0.5, abs=1e-9)
    assert apts_core_distance(1, TRIAD, 2) == pytest.approx(1.1547, abs=1e-4)


def test_apts_duplicate_point_zero():
    cluster = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
    assert apts_core_distance(0, cluster, 2) == pytest.approx(0.0, abs=1e-9)


def test_apts_singleton_rejected():
    with pytest.raises(ParameterError):
        apts_core_distance(0, np.array([[1.0, 1.0]]), 2)


def test_dsc_l_triad():
    assert density_sparseness(TRIAD, 2) == pytest.approx(1.1547, abs=1e-4)


def test_dsc_two_points():
    pts = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert density_sparseness(pts, 2) == pytest.approx(5.0)


def test_dsc_equilateral_symmetry():
    h = np.sqrt(3) / 2
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, h]])
    cores = [apts_core_distance(i, tri, 2) for i in range(3)]
    assert cores[0] == pytest.approx(cores[1]) == pytest.approx(cores[2])
    assert density_sparseness(tri, 2) == pytest.approx(max(cores[0], 1.0))


def test_dspc_l_triads():
    far = TRIAD + 10.0
    sep = density_separation(TRIAD, far, 2)
    assert sep == pytest.approx(np.sqrt(200), abs=1e-6)
    assert sep == pytest.approx(density_separation(far, TRIAD, 2))


def test_dspc_coincident_clusters_zero():
    # duplicated points give ~0 apts cores, so two coincident clusters have
    # ~0 separation (the mutual reachability floor disappears)
    cluster = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0]])
    sep = density_separation(cluster, cluster.copy(), 2)
    assert sep == pytest.approx(0.0, abs=1e-9)


def test_dbcv_two_l_triads():
    X = np.vstack([TRIAD, TRIAD + 10.0])
    report = dbcv_score(X, labeling_of([0, 0, 0, 1, 1, 1]), dim=2)
    assert report.score == pytest.approx(0.918, abs=0.001)
    assert set(report.per_cluster_validity) == {0, 1}
    assert report.n_noise == 0


def test_dbcv_interleaved_split_negative():
    X, _ = gaussian_blobs(7, np.array([[0.0, 0.0]]), 30, scale=1.0)
    labels = np.array([i % 2 for i in range(30)])
    report = dbcv_score(X, labeling_of(labels), dim=2)
    assert report.score < 0


def test_dbcv_noise_dilutes():
    centers = np.array([[0.0, 0.0], [12.0, 0.0]])
    X, labels = gaussian_blobs(3, centers, 15, scale=0.4)
    clean = dbcv_score(X, labeling_of(labels), dim=2)
    noisy_labels = labels.copy()
    noisy_labels[[0, 7, 20]] = -1
    noisy = dbcv_score(X, labeling_of(noisy_labels), dim=2)
    assert noisy.n_noise == 3
    assert noisy.score < clean.score


def test_dbcv_requires_two_clusters():
    X = random_points(1, 10, 2)
    with pytest.raises(NotScorableError):
        dbcv_score(X, labeling_of([0] * 10), dim=2)
    with pytest.raises(NotScorableError):
        dbcv_score(X, labeling_of([0] * 9 + [1]), dim=2)


def test_dbcv_bounds_and_relabel_invariance():
    for seed in range(5):
        centers = random_points(seed + 40, 3, 2, -9, 9)
        X, labels = gaussian_blobs(seed, centers, 10, scale=0.7)
        report = dbcv_score(X, labeling_of(labels), dim=2)
        assert -1.0 <= report.score <= 1.0
        for v in report.per_cluster_validity.values():
            assert -1.0 - 1e-9 <= v <= 1.0 + 1e-9
        swapped = labels.copy()
        swapped[labels == 0] = 2
        swapped[labels == 2] = 0
        report2 = dbcv_score(X, labeling_of(swapped), dim=2)
        assert report2.score == pytest.approx(report.score, abs=1e-12)


def test_dbcv_rigid_motion_invariance():
    X = np.vstack([TRIAD, TRIAD + 10.0])
    labels = labeling_of([0, 0, 0, 1, 1, 1])
    base = dbcv_score(X, labels, dim=2).score
    theta = 0.83
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    moved = X @ R.T + np.array([3.7, -11.2])
    assert dbcv_score(moved, labels, dim=2).score == pytest.approx(base, abs=1e-9)


def test_dbcv_matches_naive_oracle():
    for seed in range(6):
        centers = random_points(seed + 60, 2, 2, -6, 6)
        X, labels = gaussian_blobs(seed, centers, 8, scale=0.8)
        ours = dbcv_score(X, labeling_of(labels), dim=2).score
        assert ours == pytest.approx(naive_dbcv(X, labels, 2), abs=1e-9)


def test_dbcv_planted_beats_shuffled_95_of_100():
    centers = np.array([[0.0, 0.0], [10.0, 0.0]])
    wins = 0
    for seed in range(100):
        X, labels = gaussian_blobs(seed, centers, 20, scale=1.0)
        true_score = dbcv_score(X, labeling_of(labels), dim=2).score
        shuffled = labels.copy().tolist()
        Rng(seed * 31 + 7).shuffle(shuffled)
        shuffled_score = dbcv_score(X, labeling_of(shuffled), dim=2).score
        wins += true_score > shuffled_score
    assert wins >= 95

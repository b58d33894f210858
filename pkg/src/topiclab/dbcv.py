"""Density-based clustering validation index.

Scores a labeling in [-1, 1] by contrasting each cluster's internal
density sparseness (widest internal mutual-reachability MST edge) against
its separation from the nearest other cluster.  Noise points dilute the
weighted sum but contribute no validity term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._distance import pairwise_distances
from .errors import NotScorableError, ParameterError
from .hdbscan import Labeling, build_mst

INV_DISTANCE_CAP = 1e12  # coincident points: inverse distance caps here


@dataclass(frozen=True)
class DbcvReport:
    per_cluster_validity: dict[int, float]
    score: float
    n_points: int
    n_noise: int


def apts_core_distance(index: int, cluster_points: np.ndarray, dim: int) -> float:
    """All-points core distance of one member against its cluster."""
    pts = np.asarray(cluster_points, dtype=np.float64)
    if pts.shape[0] < 2:
        raise ParameterError("all-points core distance needs a cluster of >= 2")
    d = np.linalg.norm(pts - pts[index], axis=1)
    d = np.delete(d, index)
    return float(_apts_from_distances(d[None, :], dim)[0])


def _apts_from_distances(dist_rows: np.ndarray, dim: int) -> np.ndarray:
    """Stable vectorized ((mean of (1/d)^dim))^(-1/dim) per row.

    Computed in log space so capped inverse distances never overflow even
    for large dim.
    """
    inv = np.minimum(1.0 / np.maximum(dist_rows, 1.0 / INV_DISTANCE_CAP), INV_DISTANCE_CAP)
    logs = dim * np.log(inv)
    peak = logs.max(axis=1, keepdims=True)
    log_mean = peak[:, 0] + np.log(np.mean(np.exp(logs - peak), axis=1))
    return np.exp(-log_mean / dim)


def _cluster_geometry(pts: np.ndarray, dim: int):
    """Per-cluster apts cores, mutual-reachability matrix, MST, internal mask."""
    m = pts.shape[0]
    D = pairwise_distances(pts, "euclidean")
    rows = D[~np.eye(m, dtype=bool)].reshape(m, m - 1)
    cores = _apts_from_distances(rows, dim)
    M = np.maximum(D, np.maximum(cores[:, None], cores[None, :]))
    np.fill_diagonal(M, 0.0)
    mst = build_mst(M)
    degree = np.zeros(m, dtype=np.int64)
    for a, b, _ in mst:
        degree[a] += 1
        degree[b] += 1
    internal = degree > 1
    return cores, mst, internal


def density_sparseness(cluster_points: np.ndarray, dim: int | None = None) -> float:
    """DSC: widest MST edge between internal nodes (fallback: widest edge)."""
    pts = np.asarray(cluster_points, dtype=np.float64)
    if pts.shape[0] < 2:
        raise ParameterError("density sparseness needs >= 2 points")
    dim = dim if dim is not None else pts.shape[1]
    _, mst, internal = _cluster_geometry(pts, dim)
    internal_edges = [w for a, b, w in mst if internal[a] and internal[b]]
    if internal_edges:
        return float(max(internal_edges))
    return float(max(w for _, _, w in mst))


def density_separation(
    cluster_i: np.ndarray, cluster_j: np.ndarray, dim: int | None = None
) -> float:
    """DSPC: minimum inter-cluster mutual reachability between internal nodes."""
    pi = np.asarray(cluster_i, dtype=np.float64)
    pj = np.asarray(cluster_j, dtype=np.float64)
    if pi.shape[0] < 2 or pj.shape[0] < 2:
        raise ParameterError("density separation needs clusters of >= 2")
    dim = dim if dim is not None else pi.shape[1]
    cores_i, _, int_i = _cluster_geometry(pi, dim)
    cores_j, _, int_j = _cluster_geometry(pj, dim)
    if not int_i.any():
        int_i = np.ones(len(pi), dtype=bool)
    if not int_j.any():
        int_j = np.ones(len(pj), dtype=bool)
    a = pi[int_i]
    b = pj[int_j]
    ca = cores_i[int_i]
    cb = cores_j[int_j]
    cross = np.sqrt(np.maximum(
        np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * (a @ b.T), 0.0
    ))
    mreach = np.maximum(cross, np.maximum(ca[:, None], cb[None, :]))
    return float(mreach.min())


def dbcv_score(X: np.ndarray, labeling: Labeling, dim: int | None = None) -> DbcvReport:
    """Weighted sum over clusters of
    (min separation - sparseness) / max(min separation, sparseness).
    """
    X = np.asarray(X, dtype=np.float64)
    labels = labeling.labels if isinstance(labeling, Labeling) else np.asarray(labeling)
    if X.shape[0] != labels.shape[0]:
        raise ParameterError("points/labels length mismatch")
    dim = dim if dim is not None else X.shape[1]
    cluster_ids = sorted(int(c) for c in np.unique(labels) if c >= 0)
    if len(cluster_ids) < 2:
        raise NotScorableError(f"need >= 2 clusters, got {len(cluster_ids)}")
    members = {c: np.flatnonzero(labels == c) for c in cluster_ids}
    for c, idx in members.items():
        if len(idx) < 2:
            raise NotScorableError(f"cluster {c} has {len(idx)} < 2 points")

    geometry = {}
    for c in cluster_ids:
        pts = X[members[c]]
        cores, mst, internal = _cluster_geometry(pts, dim)
        internal_edges = [w for a, b, w in mst if internal[a] and internal[b]]
        dsc = max(internal_edges) if internal_edges else max(w for _, _, w in mst)
        use = internal if internal.any() else np.ones(len(pts), dtype=bool)
        geometry[c] = (pts[use], cores[use], float(dsc))

    min_sep = {c: np.inf for c in cluster_ids}
    for i, ci in enumerate(cluster_ids):
        for cj in cluster_ids[i + 1:]:
            a, ca, _ = geometry[ci]
            b, cb, _ = geometry[cj]
            cross = np.sqrt(np.maximum(
                np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * (a @ b.T),
                0.0,
            ))
            sep = float(np.maximum(cross, np.maximum(ca[:, None], cb[None, :])).min())
            min_sep[ci] = min(min_sep[ci], sep)
            min_sep[cj] = min(min_sep[cj], sep)

    n_total = X.shape[0]
    validity = {}
    score = 0.0
    for c in cluster_ids:
        dsc = geometry[c][2]
        sep = min_sep[c]
        denom = max(sep, dsc)
        v = 0.0 if denom == 0.0 else (sep - dsc) / denom
        validity[c] = float(v)
        score += (len(members[c]) / n_total) * v
    n_noise = int(np.sum(labels == -1))
    return DbcvReport(validity, float(score), n_total, n_noise)

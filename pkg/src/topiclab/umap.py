"""Uniform manifold approximation and projection, built from the graph up.

Exact O(n^2) neighbor search (corpora here are a few thousand rows at
most), smoothed-knn kernel widths, fuzzy graph union, least-squares fit of
the low-dimensional kernel, and a seeded SGD layout.  Every stage is
deterministic for a fixed (input, params, seed).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse

from ._distance import pairwise_distances
from ._layout import sgd_layout
from .embedding_io import EmbeddingMatrix
from .errors import ParameterError
from .rng import uniform_array

SMOOTH_K_TOLERANCE = 1e-5
MIN_SIGMA_SCALE = 1e-3


@dataclass(frozen=True)
class UmapParams:
    n_neighbors: int = 15
    n_components: int = 2
    min_dist: float = 0.1
    metric: str = "cosine"
    spread: float = 1.0
    n_epochs: int = 500
    negative_sample_rate: int = 5
    initial_lr: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise ParameterError("n_neighbors must be >= 2")
        if self.n_components < 1:
            raise ParameterError("n_components must be >= 1")
        if not 0.0 <= self.min_dist < self.spread:
            raise ParameterError("require 0 <= min_dist < spread")
        if self.metric not in ("cosine", "euclidean"):
            raise ParameterError(f"unsupported metric {self.metric!r}")
        if self.n_epochs < 0 or self.negative_sample_rate < 0:
            raise ParameterError("n_epochs and negative_sample_rate must be >= 0")


@dataclass(frozen=True)
class FuzzyGraph:
    """Symmetric weighted graph; edges stored once with head < tail."""

    n_points: int
    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class Projection:
    coords: np.ndarray
    params: UmapParams

    @property
    def seed(self) -> int:
        return self.params.seed


def _as_array(X) -> np.ndarray:
    if isinstance(X, EmbeddingMatrix):
        return np.asarray(X.values, dtype=np.float64)
    return np.asarray(X, dtype=np.float64)


def knn_graph(X, k: int, metric: str = "euclidean") -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest others per point; ties broken toward lower index."""
    X = _as_array(X)
    n = X.shape[0]
    if k >= n:
        raise ParameterError(f"k={k} must be < n={n}")
    D = pairwise_distances(X, metric)
    np.fill_diagonal(D, np.inf)
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    dists = np.take_along_axis(D, order, axis=1)
    return order, dists


def smooth_knn(distances: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (rho, sigma): rho is the nearest positive distance and sigma
    solves sum_j exp(-max(0, d_j - rho) / sigma) = log2(k) by binary search.
    """
    distances = np.asarray(distances, dtype=np.float64)
    n = distances.shape[0]
    target = np.log2(k)
    rho = np.zeros(n)
    sigma = np.ones(n)
    for i in range(n):
        row = distances[i]
        positive = row[row > 0.0]
        if positive.size == 0:
            rho[i] = 0.0
            sigma[i] = 1.0  # all-zero distances: any sigma satisfies the sum
            continue
        rho[i] = positive[0]
        lo, hi, mid = 0.0, np.inf, 1.0
        shifted = np.maximum(row - rho[i], 0.0)
        for _ in range(64):
            psum = float(np.exp(-shifted / mid).sum())
            if abs(psum - target) < SMOOTH_K_TOLERANCE:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        sigma[i] = max(mid, MIN_SIGMA_SCALE * float(row.mean()))
    return rho, sigma


def fuzzy_simplicial_set(
    indices: np.ndarray, distances: np.ndarray, rho: np.ndarray, sigma: np.ndarray
) -> FuzzyGraph:
    """Directed membership strengths unioned into a symmetric fuzzy graph
    via B = A + A^T - A o A^T.
    """
    n, k = indices.shape
    rows = np.repeat(np.arange(n), k)
    cols = indices.ravel()
    expo = np.maximum(distances - rho[:, None], 0.0) / sigma[:, None]
    vals = np.exp(-expo).ravel()
    A = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    At = A.T.tocsr()
    B = (A + At - A.multiply(At)).tocoo()
    mask = (B.row < B.col) & (B.data > 0.0)
    heads = B.row[mask].astype(np.int64)
    tails = B.col[mask].astype(np.int64)
    weights = B.data[mask].astype(np.float64)
    order = np.lexsort((tails, heads))
    return FuzzyGraph(n, heads[order], tails[order], np.minimum(weights[order], 1.0))


def fit_ab(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of 1/(1 + a x^(2b)) to the target membership curve."""
    if not 0.0 <= min_dist < spread:
        raise ParameterError("require 0 <= min_dist < spread")
    xv = np.linspace(0.0, 3.0 * spread, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    try:
        (a, b), _ = scipy.optimize.curve_fit(curve, xv, yv, p0=(1.0, 1.0), maxfev=5000)
    except RuntimeError as exc:
        raise ParameterError(f"kernel fit diverged: {exc}") from exc
    rms = float(np.sqrt(np.mean((curve(xv, a, b) - yv) ** 2)))
    # 0.025 admits the min_dist=0 optimum (RMS 0.0242) while still flagging
    # the near-flat curves that appear as min_dist approaches spread.
    if rms >= 0.025:
        raise ParameterError(
            f"kernel fit residual RMS {rms:.4f} >= 0.025 "
            f"(min_dist={min_dist}, spread={spread})"
        )
    return float(a), float(b)


def _make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    # An edge with weight w fires roughly n_epochs * w / w_max times; a
    # vanishing weight overflows to inf, meaning the edge never fires.
    result = np.full(len(weights), np.inf)
    n_samples = n_epochs * (weights / weights.max())
    positive = n_samples > 0
    with np.errstate(over="ignore"):
        result[positive] = n_epochs / n_samples[positive]
    return result


def optimize_layout(graph: FuzzyGraph, params: UmapParams) -> Projection:
    """Seeded SGD layout of a fuzzy graph into n_components dimensions."""
    if graph.n_points == 0 or graph.n_edges == 0:
        raise ParameterError("cannot lay out an empty graph")
    n = graph.n_points
    coords = uniform_array(params.seed, n * params.n_components, -10.0, 10.0)
    coords = np.ascontiguousarray(coords.reshape(n, params.n_components))
    if params.n_epochs == 0:
        return Projection(coords, params)
    a, b = fit_ab(params.min_dist, params.spread)
    # Both directions fire, mirroring the usual head/tail duplication.
    heads = np.concatenate([graph.heads, graph.tails])
    tails = np.concatenate([graph.tails, graph.heads])
    weights = np.concatenate([graph.weights, graph.weights])
    order = np.lexsort((tails, heads))
    eps = _make_epochs_per_sample(weights[order], params.n_epochs)
    coords = sgd_layout(
        coords,
        heads[order],
        tails[order],
        eps,
        params.n_epochs,
        a,
        b,
        params.negative_sample_rate,
        params.initial_lr,
        np.uint64(params.seed & 0xFFFFFFFFFFFFFFFF),
    )
    if not np.all(np.isfinite(coords)):
        raise ParameterError("layout diverged to non-finite coordinates")
    return Projection(coords, params)


def umap_reduce(X, params: UmapParams) -> Projection:
    """knn -> smoothed kernels -> fuzzy graph -> SGD layout."""
    data = _as_array(X)
    n = data.shape[0]
    if params.n_neighbors >= n:
        raise ParameterError(f"n_neighbors={params.n_neighbors} must be < n={n}")
    indices, dists = knn_graph(data, params.n_neighbors, params.metric)
    rho, sigma = smooth_knn(dists, params.n_neighbors)
    graph = fuzzy_simplicial_set(indices, dists, rho, sigma)
    return optimize_layout(graph, params)

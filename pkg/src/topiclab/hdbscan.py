"""Hierarchical density-based clustering.

Mutual-reachability graph -> Prim MST -> single-linkage dendrogram ->
condensed tree -> stability-based extraction (excess-of-mass or leaf),
with unassigned points labeled -1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._distance import pairwise_distances
from .errors import ParameterError

LAMBDA_CAP = 1e12  # lambda = 1/distance; zero distances cap here


@dataclass(frozen=True)
class HdbscanParams:
    min_cluster_size: int = 10
    min_samples: int = 5
    cluster_selection_method: str = "eom"

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise ParameterError("min_cluster_size must be >= 2")
        if self.min_samples < 1:
            raise ParameterError("min_samples must be >= 1")
        if self.cluster_selection_method not in ("eom", "leaf"):
            raise ParameterError("cluster_selection_method must be 'eom' or 'leaf'")


@dataclass(frozen=True)
class Labeling:
    """Per-point cluster assignment; -1 is noise; labels contiguous from 0."""

    labels: np.ndarray
    probabilities: np.ndarray

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max() + 1) if self.labels.size else 0

    @property
    def n_noise(self) -> int:
        return int(np.sum(self.labels == -1))

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


class CondensedTree:
    """Rows (parent, child, lambda, child_size).

    Points are ids 0..n-1; cluster ids start at n_points with the root at
    n_points exactly.  A point row records the lambda at which the point
    fell out of its parent cluster; a cluster row records a child cluster's
    birth.
    """

    def __init__(self, n_points: int, rows: list[tuple[int, int, float, int]]):
        self.n_points = n_points
        self.rows = list(rows)
        self.root = n_points
        self._children: dict[int, list[int]] = {}
        self._birth: dict[int, float] = {self.root: 0.0}
        for parent, child, lam, size in self.rows:
            if child >= n_points:
                self._children.setdefault(parent, []).append(child)
                self._birth[child] = lam

    def cluster_ids(self) -> list[int]:
        ids = {self.root}
        for parent, child, _, _ in self.rows:
            ids.add(parent)
            if child >= self.n_points:
                ids.add(child)
        return sorted(ids)

    def cluster_children(self, cid: int) -> list[int]:
        return self._children.get(cid, [])

    def birth_lambda(self, cid: int) -> float:
        return self._birth[cid]

    def stability(self) -> dict[int, float]:
        """stability(C) = sum over departures of (lambda - birth) * size."""
        stab = {cid: 0.0 for cid in self.cluster_ids()}
        for parent, _, lam, size in self.rows:
            stab[parent] += (lam - self._birth[parent]) * size
        return stab

    def point_rows(self) -> list[tuple[int, int, float]]:
        return [(p, c, lam) for p, c, lam, _ in self.rows if c < self.n_points]

    def subtree(self, cid: int) -> set[int]:
        out = {cid}
        stack = [cid]
        while stack:
            for child in self.cluster_children(stack.pop()):
                out.add(child)
                stack.append(child)
        return out


def core_distances(X: np.ndarray, k: int, metric: str = "euclidean") -> np.ndarray:
    """Distance to the k-th nearest *other* point (self excluded)."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k >= n:
        raise ParameterError(f"min_samples={k} must be < n={n}")
    D = pairwise_distances(X, metric)
    np.fill_diagonal(D, np.inf)
    return np.partition(D, k - 1, axis=1)[:, k - 1]


def mutual_reachability(d: float, core_a: float, core_b: float) -> float:
    return max(core_a, core_b, d)


def mutual_reachability_matrix(D: np.ndarray, core: np.ndarray) -> np.ndarray:
    M = np.maximum(D, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(M, 0.0)
    return M


def build_mst(weights: np.ndarray) -> list[tuple[int, int, float]]:
    """Prim's algorithm on a dense symmetric weight matrix.

    Ties are broken by comparing edges as (weight, min index, max index)
    tuples.  That total order makes the minimum spanning tree unique, so
    mutual-reachability ties (which are pervasive: a large core distance
    floors many incident edges at the same value) resolve identically in
    any algorithm using the same order.
    """
    n = weights.shape[0]
    if n < 2:
        raise ParameterError("MST needs at least 2 points")
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].astype(np.float64).copy()
    parent = np.zeros(n, dtype=np.int64)
    nodes = np.arange(n)
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        cand = np.flatnonzero(~in_tree)
        lo = np.minimum(parent[cand], cand)
        hi = np.maximum(parent[cand], cand)
        v = int(cand[np.lexsort((hi, lo, best[cand]))[0]])
        u = int(parent[v])
        a, b = (u, v) if u < v else (v, u)
        edges.append((a, b, float(best[v])))
        in_tree[v] = True
        out = ~in_tree
        w_new = weights[v]
        lo_new = np.minimum(v, nodes)
        hi_new = np.maximum(v, nodes)
        lo_old = np.minimum(parent, nodes)
        hi_old = np.maximum(parent, nodes)
        better = w_new < best
        tie = w_new == best
        better |= tie & (lo_new < lo_old)
        better |= tie & (lo_new == lo_old) & (hi_new < hi_old)
        upd = out & better
        best[upd] = w_new[upd]
        parent[upd] = v
    return edges


def _single_linkage(edges: list[tuple[int, int, float]], n: int):
    """Merge MST edges in ascending order into a scipy-style dendrogram.

    Returns (children, sizes, dists) where internal node n+t merges at
    dists[t].  Edge order ties resolve by (weight, min index, max index).
    """
    order = sorted(range(len(edges)), key=lambda e: (edges[e][2], edges[e][0], edges[e][1]))
    # union-find where the root of a set is its current dendrogram node id
    parent = list(range(2 * n - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    children: list[tuple[int, int]] = []
    sizes = [1] * n + [0] * (n - 1)
    dists: list[float] = []
    for t, e in enumerate(order):
        a, b, w = edges[e]
        ra, rb = find(a), find(b)
        new = n + t
        children.append((min(ra, rb), max(ra, rb)))
        sizes[new] = sizes[ra] + sizes[rb]
        dists.append(w)
        parent[ra] = new
        parent[rb] = new
    return children, sizes, dists


def _leaves_under(node: int, n: int, children) -> list[int]:
    stack, out = [node], []
    while stack:
        cur = stack.pop()
        if cur < n:
            out.append(cur)
        else:
            left, right = children[cur - n]
            stack.extend((left, right))
    return sorted(out)


def condense_tree(
    mst_edges: list[tuple[int, int, float]], min_cluster_size: int, n_points: int | None = None
) -> CondensedTree:
    """Collapse the single-linkage dendrogram into min_cluster_size clusters.

    Walking root-down: a split child smaller than min_cluster_size falls
    out as points at that lambda; two large children are born as new
    clusters; one large child continues as the same cluster.
    """
    n = n_points if n_points is not None else len(mst_edges) + 1
    if n < 2:
        return CondensedTree(n, [])
    children, sizes, dists = _single_linkage(mst_edges, n)
    root_node = 2 * n - 2
    root_cid = n
    rows: list[tuple[int, int, float, int]] = []
    next_cid = n + 1
    # stack of (dendrogram node, condensed cluster id owning it)
    stack = [(root_node, root_cid)]
    while stack:
        node, cid = stack.pop()
        if node < n:
            continue
        left, right = children[node - n]
        lam = LAMBDA_CAP if dists[node - n] <= 0.0 else min(1.0 / dists[node - n], LAMBDA_CAP)
        big_l = sizes[left] >= min_cluster_size
        big_r = sizes[right] >= min_cluster_size
        if big_l and big_r:
            for child in (left, right):
                rows.append((cid, next_cid, lam, sizes[child]))
                stack.append((child, next_cid))
                next_cid += 1
        elif big_l or big_r:
            big, small = (left, right) if big_l else (right, left)
            for point in _leaves_under(small, n, children):
                rows.append((cid, point, lam, 1))
            stack.append((big, cid))
        else:
            for child in (left, right):
                for point in _leaves_under(child, n, children):
                    rows.append((cid, point, lam, 1))
    return CondensedTree(n, rows)


def _eom_selection(tree: CondensedTree) -> set[int]:
    stability = tree.stability()
    clusters = [c for c in tree.cluster_ids() if c != tree.root]
    chosen: dict[int, set[int]] = {}
    value: dict[int, float] = {}
    for cid in sorted(clusters, reverse=True):  # children have larger ids
        kids = tree.cluster_children(cid)
        if not kids:
            value[cid] = stability[cid]
            chosen[cid] = {cid}
            continue
        kid_sum = sum(value[k] for k in kids)
        if stability[cid] > kid_sum:
            value[cid] = stability[cid]
            chosen[cid] = {cid}
        else:
            value[cid] = kid_sum
            chosen[cid] = set().union(*(chosen[k] for k in kids))
    out: set[int] = set()
    for kid in tree.cluster_children(tree.root):
        out |= chosen[kid]
    return out


def _leaf_selection(tree: CondensedTree) -> set[int]:
    return {
        c
        for c in tree.cluster_ids()
        if c != tree.root and not tree.cluster_children(c)
    }


def select_clusters(tree: CondensedTree, method: str = "eom") -> Labeling:
    """Extract a flat labeling from a condensed tree.

    A point belongs to the selected cluster nearest above its fall-out
    node; points with no selected ancestor are noise.  Probability is the
    point's fall-out lambda over the cluster's max lambda, clipped to [0,1].
    """
    if method not in ("eom", "leaf"):
        raise ParameterError("method must be 'eom' or 'leaf'")
    n = tree.n_points
    labels = np.full(n, -1, dtype=np.int64)
    probs = np.zeros(n, dtype=np.float64)
    selected = _eom_selection(tree) if method == "eom" else _leaf_selection(tree)
    if not selected:
        return Labeling(labels, probs)

    # map every condensed node to its nearest selected ancestor-or-self
    owner: dict[int, int] = {}
    for cid in selected:
        for node in tree.subtree(cid):
            owner[node] = cid

    fall_lambda = np.zeros(n)
    for parent, point, lam in tree.point_rows():
        cid = owner.get(parent)
        if cid is not None:
            labels[point] = cid  # provisional: condensed id
            fall_lambda[point] = lam

    # relabel contiguously by smallest member point index
    final = {}
    for cid in sorted(selected, key=lambda c: int(np.flatnonzero(labels == c)[0]) if np.any(labels == c) else n):
        if np.any(labels == cid):
            final[cid] = len(final)
    out = np.full(n, -1, dtype=np.int64)
    for cid, lab in final.items():
        mask = labels == cid
        out[mask] = lab
        lam_max = fall_lambda[mask].max()
        if lam_max > 0:
            probs[mask] = np.clip(fall_lambda[mask] / lam_max, 0.0, 1.0)
        else:
            probs[mask] = 1.0
    return Labeling(out, probs)


def hdbscan_cluster(
    X: np.ndarray, params: HdbscanParams, metric: str = "euclidean"
) -> Labeling:
    """Full pipeline: cores -> mutual reachability -> MST -> condense -> select."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2 or n < params.min_cluster_size:
        return Labeling(np.full(n, -1, dtype=np.int64), np.zeros(n))
    core = core_distances(X, params.min_samples, metric)
    D = pairwise_distances(X, metric)
    M = mutual_reachability_matrix(D, core)
    mst = build_mst(M)
    tree = condense_tree(mst, params.min_cluster_size, n_points=n)
    return select_clusters(tree, params.cluster_selection_method)

"""Dense pairwise-distance helpers (exact, numpy only)."""
from __future__ import annotations

import numpy as np

from .errors import ParameterError

METRICS = ("cosine", "euclidean")


def pairwise_distances(X: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """Full n x n distance matrix with an exactly-zero diagonal."""
    X = np.asarray(X, dtype=np.float64)
    if metric == "euclidean":
        sq = np.sum(X * X, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        np.maximum(d2, 0.0, out=d2)
        D = np.sqrt(d2)
    elif metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0.0):
            raise ParameterError("cosine distance undefined for zero vectors")
        U = X / norms[:, None]
        D = 1.0 - U @ U.T
        np.clip(D, 0.0, 2.0, out=D)
    else:
        raise ParameterError(f"unknown metric {metric!r}; choose from {METRICS}")
    np.fill_diagonal(D, 0.0)
    return D

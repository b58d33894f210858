"""Numba kernel for the stochastic embedding layout.

The loop is strictly serial and uses an inline splitmix64 stream, so a
(graph, params, seed) triple always produces bit-identical coordinates.
"""
from __future__ import annotations

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@numba.njit(inline="always")
def _next_u64(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return state, z


@numba.njit(inline="always")
def _clip(x):
    if x > 4.0:
        return 4.0
    if x < -4.0:
        return -4.0
    return x


@numba.njit(cache=True)
def sgd_layout(coords, heads, tails, epochs_per_sample, n_epochs, a, b,
               negative_sample_rate, initial_lr, seed):
    """Epoch-per-sample SGD over directed edges; repels from the head only."""
    n_points, dim = coords.shape
    n_edges = heads.shape[0]
    epoch_of_next = epochs_per_sample.copy()
    state = np.uint64(seed)
    for epoch in range(n_epochs):
        alpha = initial_lr * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if epoch_of_next[e] > epoch:
                continue
            i = heads[e]
            j = tails[e]
            d2 = 0.0
            for d in range(dim):
                diff = coords[i, d] - coords[j, d]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2**b + 1.0)
            else:
                coeff = 0.0
            for d in range(dim):
                grad = _clip(coeff * (coords[i, d] - coords[j, d]))
                coords[i, d] += alpha * grad
                coords[j, d] -= alpha * grad
            for _ in range(negative_sample_rate):
                state, z = _next_u64(state)
                k = int(z % np.uint64(n_points))
                if k == i:
                    continue
                d2 = 0.0
                for d in range(dim):
                    diff = coords[i, d] - coords[k, d]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = 2.0 * b / ((0.001 + d2) * (a * d2**b + 1.0))
                    for d in range(dim):
                        grad = _clip(coeff * (coords[i, d] - coords[k, d]))
                        coords[i, d] += alpha * grad
                else:
                    # coincident with the sampled point: push apart hard
                    for d in range(dim):
                        coords[i, d] += alpha * 4.0
            epoch_of_next[e] += epochs_per_sample[e]
    return coords

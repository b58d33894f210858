"""Deterministic random-number utilities.

Everything that needs randomness in this package goes through splitmix64 so
results are bit-stable across platforms and library versions.  numpy's
Generator streams are not guaranteed stable across releases, which would
break the byte-identical-rerun contract.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = float(2.0**-53)


def splitmix64(x: np.ndarray | int) -> np.ndarray | np.uint64:
    """Finalizer of the splitmix64 generator; accepts uint64 scalars or arrays."""
    z = (np.uint64(x) if np.isscalar(x) else x.astype(np.uint64)) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniform_array(seed: int, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Deterministic uniform floats in [lo, hi) from a counter stream."""
    with np.errstate(over="ignore"):
        base = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * _GOLDEN
        counters = np.arange(n, dtype=np.uint64) + base
        bits = splitmix64(counters)
    u = (bits >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return lo + (hi - lo) * u


def derive_seed(seed: int, *parts: object) -> int:
    """Derive a child seed from a base seed and a label, stable forever.

    Hashing the label (rather than an enumeration index) means enlarging a
    grid or adding topics never changes previously derived seeds.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(f"{seed}\x1f{text}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """Small deterministic generator (splitmix64 stream) for sampling/shuffles."""

    def __init__(self, seed: int):
        self._state = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)

    def next_u64(self) -> int:
        with np.errstate(over="ignore"):
            self._state = self._state + _GOLDEN
            out = splitmix64(self._state)
        return int(out)

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange needs n > 0")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        pool = list(items)
        self.shuffle(pool)
        return pool[:k]

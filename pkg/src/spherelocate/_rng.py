"""Counter-based sampling for RANSAC.

Iteration ``i`` is driven only by the sub-seed ``seed ^ i`` hashed with
SplitMix64, so any block of iterations can be evaluated in any order (or in
parallel) and yields the same hypotheses.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64(x: np.ndarray) -> np.ndarray:
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def iteration_streams(seed: int, start: int, stop: int, k: int) -> np.ndarray:
    """``(stop - start, k)`` uint64 words; row i depends only on ``seed ^ (start + i)``."""
    idx = np.arange(start, stop, dtype=np.uint64)
    state = np.uint64(seed & _MASK64) ^ idx
    out = np.empty((idx.size, k), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(k):
            state = splitmix64(state)
            out[:, j] = state
    return out


def distinct_indices(words: np.ndarray, n: int) -> np.ndarray:
    """Map rows of ``k`` random words to ``k`` distinct indices in ``range(n)``.

    Draw j picks uniformly among the ``n - j`` indices not yet taken.
    """
    m, k = words.shape
    if n < k:
        raise ValueError(f"cannot draw {k} distinct indices from {n}")
    picks = np.empty((m, k), dtype=np.int64)
    for j in range(k):
        r = (words[:, j] % np.uint64(n - j)).astype(np.int64)
        # shift past already-taken indices, smallest first
        taken = np.sort(picks[:, :j], axis=1)
        for c in range(j):
            r = r + (r >= taken[:, c])
        picks[:, j] = r
    return picks

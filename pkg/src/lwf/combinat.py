"""Multi-index enumeration shared by the rule and polynomial machinery."""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations

import numpy as np


@lru_cache(maxsize=None)
def compositions(K: int, n: int) -> np.ndarray:
    """All multi-indices of K nonnegative integers summing to n.

    Deterministic order; shape ``(C(n+K-1, K-1), K)``.  Cached because the
    same (K, n) pairs recur in inner loops.
    """
    if K < 1 or n < 0:
        raise ValueError(f"need K >= 1 and n >= 0, got K={K}, n={n}")
    rows = []
    for bars in combinations(range(n + K - 1), K - 1):
        prev = -1
        row = []
        for bar in bars:
            row.append(bar - prev - 1)
            prev = bar
        row.append(n + K - 2 - prev)
        rows.append(row)
    out = np.array(rows, dtype=np.int64).reshape(-1, K)
    out.flags.writeable = False
    return out


def multinomial_coefficient(index) -> int:
    """Exact multinomial coefficient ``(sum index)! / prod(index_i!)``."""
    total = int(sum(index))
    out = 1
    rest = total
    for z in index:
        out *= math.comb(rest, int(z))
        rest -= int(z)
    return out


@lru_cache(maxsize=None)
def multinomial_coefficients(K: int, n: int) -> np.ndarray:
    """Coefficients aligned with :func:`compositions` (float array)."""
    Z = compositions(K, n)
    out = np.array([multinomial_coefficient(z) for z in Z], dtype=float)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def composition_index(K: int, n: int) -> dict[tuple[int, ...], int]:
    """Row lookup: multi-index tuple -> row position in :func:`compositions`."""
    Z = compositions(K, n)
    return {tuple(int(v) for v in row): i for i, row in enumerate(Z)}

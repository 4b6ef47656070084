"""Natural-breaks and even-interval partitioning of 1-D count values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PartitionError(Exception):
    pass


@dataclass(frozen=True)
class PartitionSet:
    """Class boundaries over values plus per-value class labels.

    ``breaks`` are ascending boundary values; a value v belongs to class
    ``searchsorted(breaks, v, side='right')`` (half-open intervals).
    ``labels[i]`` is the class of the i-th input value. ``n_classes`` is the
    effective class count after any clamping.
    """
    breaks: tuple[float, ...]
    labels: tuple[int, ...]
    n_classes: int

    def assign(self, value: float) -> int:
        return int(np.searchsorted(self.breaks, value, side="right"))


def jenks_breaks(values, k: int) -> PartitionSet:
    """Optimal contiguous k-class split minimizing within-class squared deviation.

    Dynamic programming over distinct sorted values (O(k n^2)); k is clamped
    to the number of distinct values. Ties go to the earlier break.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise PartitionError("empty value list")
    if k < 1:
        raise PartitionError("k must be >= 1")
    distinct, counts = np.unique(values, return_counts=True)
    n = distinct.size
    k = min(k, n)
    if k == 1:
        return PartitionSet(breaks=(), labels=(0,) * values.size, n_classes=1)

    # weighted prefix sums over distinct values
    w = counts.astype(float)
    cw = np.concatenate([[0.0], np.cumsum(w)])
    cs = np.concatenate([[0.0], np.cumsum(w * distinct)])
    cs2 = np.concatenate([[0.0], np.cumsum(w * distinct * distinct)])

    def seg_cost(i, j):
        # within-class sum of squared deviations for distinct[i:j]
        tw = cw[j] - cw[i]
        ts = cs[j] - cs[i]
        return (cs2[j] - cs2[i]) - ts * ts / tw

    INF = float("inf")
    cost = np.full((n + 1, k + 1), INF)
    split = np.zeros((n + 1, k + 1), dtype=int)
    cost[0, 0] = 0.0
    for j in range(1, n + 1):
        cost[j, 1] = seg_cost(0, j)
    for c in range(2, k + 1):
        for j in range(c, n + 1):
            best, best_i = INF, c - 1
            for i in range(c - 1, j):
                cand = cost[i, c - 1] + seg_cost(i, j)
                if cand < best:  # strict: keeps the earliest split on ties
                    best, best_i = cand, i
            cost[j, c] = best
            split[j, c] = best_i

    # recover class start indices into distinct values
    starts = []
    j, c = n, k
    while c > 1:
        j = split[j, c]
        starts.append(j)
        c -= 1
    starts.reverse()
    breaks = tuple(float(distinct[s]) for s in starts)
    labels = tuple(int(np.searchsorted(breaks, v, side="right")) for v in values)
    return PartitionSet(breaks=breaks, labels=labels, n_classes=k)


def even_breaks(values, k: int) -> PartitionSet:
    """Boundaries at equal intervals of [min, max]; classes may be empty."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise PartitionError("empty value list")
    if k < 1:
        raise PartitionError("k must be >= 1")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi or k == 1:
        return PartitionSet(breaks=(), labels=(0,) * values.size, n_classes=1)
    breaks = tuple(lo + i * (hi - lo) / k for i in range(1, k))
    labels = tuple(min(int(np.searchsorted(breaks, v, side="right")), k - 1)
                   for v in values)
    return PartitionSet(breaks=breaks, labels=labels, n_classes=k)

"""Greedy arrival orderings by pairwise SNP distance."""

from __future__ import annotations

import numpy as np

__all__ = ["compute_ordering", "snp_distance_matrix"]


def snp_distance_matrix(alignment: np.ndarray) -> np.ndarray:
    a = np.asarray(alignment)
    return (a[:, None, :] != a[None, :, :]).sum(axis=2)


def compute_ordering(alignment: np.ndarray, kind: str) -> list[int]:
    """Seed with the extreme pair (lower index first), then repeatedly append
    the sequence at minimum (nearest) or maximum (furthest) SNP distance to
    any already-selected sequence.  All ties break to the lowest index."""
    if kind not in ("nearest", "furthest"):
        raise ValueError("ordering kind must be nearest or furthest")
    d = snp_distance_matrix(alignment)
    t = d.shape[0]
    if t < 2:
        return list(range(t))
    better = (lambda a, b: a < b) if kind == "nearest" else (lambda a, b: a > b)
    best = None
    for i in range(t):
        for j in range(i + 1, t):
            if best is None or better(d[i, j], d[best[0], best[1]]):
                best = (i, j)
    order = [best[0], best[1]]
    remaining = [i for i in range(t) if i not in order]
    while remaining:
        scores = [
            (min if kind == "nearest" else max)(int(d[c, s]) for s in order)
            for c in remaining
        ]
        pick = 0
        for c in range(1, len(remaining)):
            if better(scores[c], scores[pick]):
                pick = c
        order.append(remaining.pop(pick))
    return order

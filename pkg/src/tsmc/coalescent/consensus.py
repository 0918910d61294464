"""Majority-rule consensus summaries of weighted tree clouds."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .likelihood import CoalState
from .tree import NewickNode, subtree_leaves

__all__ = ["majority_consensus", "weighted_median"]


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    order = np.argsort(values)
    cum = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cum, 0.5 * cum[-1])])


def majority_consensus(
    states: list[CoalState],
    weights: np.ndarray,
    names: Optional[list[str]] = None,
    height_stat: str = "median",
) -> NewickNode:
    """Clades carrying more than half the particle weight, as one tree.

    Majority clades are pairwise compatible, so they nest into a (possibly
    multifurcating) tree.  Each consensus node carries its clade's weight as
    support and a height aggregated over the particles containing the clade:
    the weighted median by default, the weighted mean with
    ``height_stat="mean"``.  Branch lengths are height differences and can
    come out negative when medians invert across nesting levels; they are
    reported as computed.
    """
    if height_stat not in ("median", "mean"):
        raise ValueError("height_stat must be median or mean")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    t = states[0].tree.leaf_count
    if any(s.tree.leaf_count != t for s in states):
        raise ValueError("particles disagree on the leaf set")
    if names is None:
        names = [str(i) for i in range(t)]

    support: dict[frozenset, float] = {}
    samples: dict[frozenset, list] = {}
    for wp, state in zip(w, states):
        tree = state.tree
        for j in range(t - 1):
            clade = frozenset(subtree_leaves(tree, t + j))
            support[clade] = support.get(clade, 0.0) + wp
            samples.setdefault(clade, []).append((float(tree.heights[j]), wp))

    selected = {c: s for c, s in support.items() if s > 0.5}
    root_clade = frozenset(range(t))
    selected.setdefault(root_clade, support.get(root_clade, 0.0))

    def clade_height(clade: frozenset) -> float:
        vals, wts = (np.asarray(v) for v in zip(*samples[clade]))
        if height_stat == "mean":
            return float(np.dot(vals, wts) / wts.sum())
        return weighted_median(vals, wts)

    heights = {c: clade_height(c) for c in selected}
    nodes = {c: NewickNode(support=round(selected[c], 12)) for c in selected}
    leaves = {i: NewickNode(name=names[i]) for i in range(t)}

    by_size = sorted(selected, key=len)
    for idx, clade in enumerate(by_size):
        container = None
        for other in by_size[idx + 1 :]:
            if clade < other:
                container = other
                break
            if clade & other:
                raise AssertionError("incompatible majority clades")
        if container is not None:
            nodes[clade].length = heights[container] - heights[clade]
            nodes[container].children.append(nodes[clade])
    for i in range(t):
        container = min((c for c in selected if i in c), key=len)
        leaves[i].length = heights[container]
        nodes[container].children.append(leaves[i])
    return nodes[root_clade]

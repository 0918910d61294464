"""Coalescent prior and Jukes-Cantor likelihoods for time-trees.

The sequence likelihood is reported relative to a per-site calibration that
counts the injective letter assignments compatible with the observed column
(4!/(4-B)! for B distinct letters).  With that factor the two-leaf pruning
value coincides exactly with the closed-form pairwise mismatch likelihood, so
either route can check the other.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import lgamma, log

import numpy as np

from .tree import CoalTree

__all__ = [
    "ALPHABET",
    "CoalState",
    "SeqAlignment",
    "coalescent_log_prior",
    "jc_branch_logprobs",
    "log_posterior",
    "log_theta_prior",
    "pairwise_log_likelihood",
    "pruning_log_likelihood",
    "simulate_alignment",
    "site_patterns",
]

THETA_RATE = 5.0  # exponential rate of the mutation-rate prior

ALPHABET = "ACGT"


@dataclass(frozen=True)
class SeqAlignment:
    """Aligned sequences as integer letter codes (row per taxon).

    letters[i, j] indexes ALPHABET; every row has the same site count and
    anything outside {A, C, G, T} is rejected before construction.
    """

    names: tuple[str, ...]
    letters: np.ndarray

    def __post_init__(self):
        letters = np.asarray(self.letters, dtype=np.int8)
        if letters.ndim != 2:
            raise ValueError("letters must be a 2-d array")
        if letters.size and (letters.min() < 0 or letters.max() > 3):
            raise ValueError("letter codes must lie in 0..3")
        if len(self.names) != letters.shape[0]:
            raise ValueError("one name per sequence required")
        if len(set(self.names)) != len(self.names):
            raise ValueError("sequence names must be unique")
        object.__setattr__(self, "letters", letters)

    @property
    def leaf_count(self) -> int:
        return int(self.letters.shape[0])

    @property
    def n_sites(self) -> int:
        return int(self.letters.shape[1])

    def row_string(self, i: int) -> str:
        return "".join(ALPHABET[c] for c in self.letters[i])


@dataclass(frozen=True)
class CoalState:
    """One particle: a genealogy plus its mutation rate."""

    tree: CoalTree
    theta: float

    def with_tree(self, tree: CoalTree) -> "CoalState":
        return replace(self, tree=tree)

    def with_theta(self, theta: float) -> "CoalState":
        return replace(self, theta=theta)


def coalescent_log_prior(tree: CoalTree) -> float:
    """Standard coalescent density on the ascending coalescence heights.

    While a lineages remain, the next merger waits an Exp(a(a-1)/2) time, so
    the log density is -sum_a C(a,2) * (duration with a lineages).
    """
    t = tree.leaf_count
    if t == 1:
        return 0.0
    prev = 0.0
    out = 0.0
    for i, h in enumerate(tree.heights):
        a = t - i
        out -= 0.5 * a * (a - 1) * (float(h) - prev)
        prev = float(h)
    return out


def log_theta_prior(theta: float) -> float:
    if theta <= 0.0:
        return -np.inf
    return log(THETA_RATE) - THETA_RATE * theta


def jc_branch_logprobs(theta: float, b: float) -> tuple[float, float]:
    """(log P[same letter], log P[different letter]) across one branch.

    Each lineage mutates at rate theta/2, so a branch of duration b carries
    e = exp(-2*theta*b/3) and P_same = 1/4 + 3/4 e, P_diff = 1/4 - 1/4 e.
    """
    e = np.exp(-2.0 * theta * b / 3.0)
    with np.errstate(divide="ignore"):
        return float(np.log(0.25 + 0.75 * e)), float(np.log(0.25 - 0.25 * e))


def site_patterns(alignment: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Collapse columns to unique patterns.

    Returns (patterns (t, U), counts (U,), log calibration) where the
    calibration sums log 4!/(4-B_s)! over all sites, B_s being the number of
    distinct letters in column s.
    """
    alignment = np.asarray(alignment)
    if alignment.ndim != 2:
        raise ValueError("alignment must be a 2-d array of letter codes")
    cols, counts = np.unique(alignment.T, axis=0, return_counts=True)
    distinct = np.array([len(set(c.tolist())) for c in cols])
    log_factor = float(np.sum(counts * (lgamma(5.0) - np.vectorize(lgamma)(5.0 - distinct))))
    return cols.T, counts, log_factor


def pruning_log_likelihood(tree: CoalTree, theta: float, alignment: np.ndarray) -> float:
    """Felsenstein pruning under Jukes-Cantor, times the pattern calibration.

    Partial likelihoods flow leaf to root; a branch of duration b maps a
    child vector V to e*V + (1-e)/4 * sum(V) with e = exp(-2*theta*b/3).
    The root closes with the uniform quarter distribution.
    """
    t = tree.leaf_count
    alignment = np.asarray(alignment)
    if alignment.shape[0] != t:
        raise ValueError("alignment row count must match the leaf count")
    patterns, counts, log_factor = site_patterns(alignment)
    u = patterns.shape[1]
    partial = np.zeros((tree.node_count, 4, u))
    idx = np.arange(u)
    for leaf in range(t):
        partial[leaf, patterns[leaf], idx] = 1.0
    scale = np.zeros(u)
    for j in range(t - 1):
        node = t + j
        acc = np.ones((4, u))
        for child in tree.children[j]:
            child = int(child)
            b = tree.node_height(node) - tree.node_height(child)
            e = np.exp(-2.0 * theta * b / 3.0)
            v = partial[child]
            acc *= e * v + 0.25 * (1.0 - e) * v.sum(axis=0)
        top = acc.max(axis=0)
        scale += np.log(top)
        partial[node] = acc / top
    site_log = scale + np.log(0.25 * partial[tree.root].sum(axis=0))
    return float(np.dot(counts, site_log)) + log_factor


def pairwise_log_likelihood(theta: float, h: float, mismatches: int, n_sites: int) -> float:
    """Closed form for two sequences coalescing at height h.

    Matches two-leaf pruning exactly: mismatching sites contribute
    log(3/4 - 3/4 e) and matching ones log(1/4 + 3/4 e), e = exp(-4*theta*h/3).
    The likelihood peaks at h = -3/(4 theta) log(1 - 4m/(3n)).
    """
    e = np.exp(-4.0 * theta * h / 3.0)
    m = mismatches
    out = 0.0
    if m:
        out += m * np.log(0.75 - 0.75 * e)
    if n_sites - m:
        out += (n_sites - m) * np.log(0.25 + 0.75 * e)
    return float(out)


def simulate_alignment(
    tree: CoalTree, theta: float, n_sites: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw letters down the tree under the same Jukes-Cantor process.

    Along a branch of duration b the letter survives with probability
    e = exp(-2*theta*b/3) and otherwise redraws uniformly, which reproduces
    P_same = 1/4 + 3/4 e.
    """
    t = tree.leaf_count
    letters = np.empty((tree.node_count, n_sites), dtype=np.int8)
    letters[tree.root] = rng.integers(0, 4, size=n_sites)
    for j in reversed(range(t - 1)):
        node = t + j
        for child in tree.children[j]:
            child = int(child)
            b = tree.node_height(node) - tree.node_height(child)
            keep = rng.random(n_sites) < np.exp(-2.0 * theta * b / 3.0)
            letters[child] = np.where(keep, letters[node], rng.integers(0, 4, size=n_sites))
    return letters[:t].copy()


def log_posterior(state: CoalState, alignment: np.ndarray) -> float:
    """Unnormalised posterior of (tree, theta) given the aligned letters."""
    lp = log_theta_prior(state.theta)
    if not np.isfinite(lp):
        return -np.inf
    lp += coalescent_log_prior(state.tree)
    lp += pruning_log_likelihood(state.tree, state.theta, alignment)
    return float(lp)

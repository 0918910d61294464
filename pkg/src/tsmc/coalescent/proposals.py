"""Lineage-then-height insertion proposals and their importance weights.

A new sequence enters by (i) picking an existing leaf lineage with probability
tied to the SNP distance, (ii) drawing an attachment height from a density
shaped like the pairwise likelihood, and (iii) grafting the new leaf there
(unit Jacobian).  The pushed-forward density sums the proposal mass over every
lineage that shares the attachment branch, so the weight never depends on
which of those equivalent lineages was drawn.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import asin, exp, inf, log, pi, sin, sqrt

import numpy as np
from scipy.special import ndtr, ndtri

from .likelihood import CoalState, log_posterior
from .tree import CoalTree, insert_leaf, lambda_set, remove_leaf

__all__ = [
    "ProposalConfig",
    "height_log_pdf",
    "height_proposal",
    "insertion_log_weight",
    "insertion_push_log_density",
    "lineage_log_probs",
    "propose_insertion",
    "snp_counts",
]

BETA_MAX = 2.0 * pi / 3.0  # arcsin image of the mismatch fraction range
SATURATION = 0.75  # mismatch fraction with no finite likelihood mode


@dataclass(frozen=True)
class ProposalConfig:
    lineage_power: float = 1.0
    height_kind: str = "laplace"
    spr_moves_per_sweep: int = 20

    def __post_init__(self) -> None:
        if self.lineage_power not in (0.0, 1.0, 2.0, 4.0):
            raise ValueError("lineage_power must be one of 0, 1, 2, 4")
        if self.height_kind not in ("laplace", "exp1"):
            raise ValueError("height_kind must be laplace or exp1")
        if self.spr_moves_per_sweep < 0:
            raise ValueError("spr_moves_per_sweep must be >= 0")


def snp_counts(alignment: np.ndarray, new_seq: np.ndarray) -> np.ndarray:
    """Mismatch count of the incoming sequence against each existing row."""
    alignment = np.asarray(alignment)
    new_seq = np.asarray(new_seq)
    if alignment.shape[1] != new_seq.shape[0]:
        raise ValueError("sequence length mismatch")
    return (alignment != new_seq[None, :]).sum(axis=1)


def lineage_log_probs(
    theta: float, n_sites: int, counts: np.ndarray, power: float
) -> np.ndarray:
    """Normalised log-probabilities of attaching to each existing leaf.

    Mass (N*theta / (t + N*theta))^(M_s * power): the base ratio is the
    probability that a pair separated by one more coalescence interval
    disagrees at a site, so leaves with few mismatches attract the new leaf.
    Power 0 is exactly uniform.
    """
    counts = np.asarray(counts, dtype=float)
    t = counts.shape[0]
    if power == 0.0:
        return np.full(t, -log(t))
    base = log(n_sites * theta) - log(t + n_sites * theta)
    raw = counts * power * base
    m = raw.max()
    return raw - (m + log(np.exp(raw - m).sum()))


def _resolve_kind(kind: str, m_s: float, n_sites: int) -> str:
    # the arcsin mean leaves the valid range at saturation; fall back there
    if kind == "laplace" and m_s / n_sites >= SATURATION:
        return "exp1"
    return kind


def height_proposal(
    rng: np.random.Generator,
    theta: float,
    m_s: int,
    n_sites: int,
    kind: str = "laplace",
) -> tuple[float, float]:
    """Draw an attachment height; returns (h, log_pdf at h).

    laplace: beta ~ Normal(2 arcsin sqrt(M/N), 1/N) truncated to (0, 2pi/3),
    mapped through h = -3/(4 theta) log(1 - (4/3) sin^2(beta/2)).  The beta
    mean sits at the pairwise-likelihood maximiser and the 1/N variance is the
    arcsine-stabilised binomial curvature.  exp1: h ~ Exp(1).
    """
    kind = _resolve_kind(kind, m_s, n_sites)
    if kind == "exp1":
        h = float(rng.exponential(1.0))
        return h, -h
    mean = 2.0 * asin(sqrt(m_s / n_sites))
    sd = 1.0 / sqrt(n_sites)
    lo = ndtr((0.0 - mean) / sd)
    hi = ndtr((BETA_MAX - mean) / sd)
    beta = mean + sd * ndtri(lo + rng.random() * (hi - lo))
    q = sin(0.5 * beta) ** 2
    h = -3.0 / (4.0 * theta) * log(1.0 - 4.0 * q / 3.0)
    return h, height_log_pdf(h, theta, m_s, n_sites, kind)


def height_log_pdf(
    h: float, theta: float, m_s: int, n_sites: int, kind: str = "laplace"
) -> float:
    kind = _resolve_kind(kind, m_s, n_sites)
    if h <= 0.0:
        return -inf
    if kind == "exp1":
        return -h
    mean = 2.0 * asin(sqrt(m_s / n_sites))
    sd = 1.0 / sqrt(n_sites)
    lo = ndtr((0.0 - mean) / sd)
    hi = ndtr((BETA_MAX - mean) / sd)
    e = exp(-4.0 * theta * h / 3.0)
    q = 0.75 * (1.0 - e)
    beta = 2.0 * asin(sqrt(q))
    z = (beta - mean) / sd
    log_norm = -0.5 * z * z - log(sd) - 0.5 * log(2.0 * pi) - log(hi - lo)
    # d beta / d h, the change of variables back to height space
    log_jac = log(theta) - 4.0 * theta * h / 3.0 - 0.5 * (log(q) + np.log1p(-q))
    return float(log_norm + log_jac)


def propose_insertion(
    state: CoalState,
    counts: np.ndarray,
    n_sites: int,
    cfg: ProposalConfig,
    rng: np.random.Generator,
) -> CoalState:
    """Grow one particle by a leaf: lineage choice, height draw, graft."""
    probs = np.exp(lineage_log_probs(state.theta, n_sites, counts, cfg.lineage_power))
    g = int(rng.choice(counts.shape[0], p=probs / probs.sum()))
    for _ in range(100):
        h, _ = height_proposal(rng, state.theta, int(counts[g]), n_sites, cfg.height_kind)
        try:
            tree = insert_leaf(state.tree, g, h)
        except ValueError:
            continue  # height collided with an existing one; redraw
        return state.with_tree(tree)
    raise RuntimeError("could not draw a collision-free attachment height")


def _reduced_tree(tree: CoalTree) -> CoalTree:
    memo = tree._memo.get("reduced")
    if memo is None:
        memo = remove_leaf(tree, tree.leaf_count - 1)
        tree._memo["reduced"] = memo
    return memo


def insertion_push_log_density(
    state: CoalState,
    reduced_alignment: np.ndarray,
    counts: np.ndarray,
    n_sites: int,
    cfg: ProposalConfig,
) -> float:
    """Source posterior carried through the insertion map, at current values.

    Equals log posterior of the reduced state (newest leaf pruned) plus the
    log of the summed proposal mass over every lineage in the attachment
    branch's leaf set; the grafting map itself has unit Jacobian.  Re-evaluable
    after MCMC has moved theta, heights or the topology.
    """
    tree = state.tree
    new_leaf = tree.leaf_count - 1
    reduced = _reduced_tree(tree)
    base = log_posterior(CoalState(reduced, state.theta), reduced_alignment)
    if not np.isfinite(base):
        return -inf
    shared = lambda_set(tree, new_leaf)
    assert shared, "attachment branch has no leaves below it"
    h_att = tree.node_height(int(tree.parent[new_leaf]))
    lg = lineage_log_probs(state.theta, n_sites, counts, cfg.lineage_power)
    terms = [
        lg[s] + height_log_pdf(h_att, state.theta, int(counts[s]), n_sites, cfg.height_kind)
        for s in shared
    ]
    m = max(terms)
    if not np.isfinite(m):
        return -inf
    return float(base + m + log(sum(exp(v - m) for v in terms)))


def insertion_log_weight(
    state_old: CoalState,
    state_new: CoalState,
    alignment_new: np.ndarray,
    cfg: ProposalConfig,
) -> float:
    """Importance weight of one grown particle against the new posterior."""
    if state_new.tree.leaf_count != state_old.tree.leaf_count + 1:
        raise ValueError("states are not one insertion apart")
    alignment_new = np.asarray(alignment_new)
    counts = snp_counts(alignment_new[:-1], alignment_new[-1])
    push = insertion_push_log_density(
        state_new, alignment_new[:-1], counts, alignment_new.shape[1], cfg
    )
    return float(log_posterior(state_new, alignment_new) - push)

"""Metropolis moves on (tree, theta) particles and their scale adaptation.

Each sweep walks theta multiplicatively, moves every coalescence height
inside its local bracket with a truncated-normal step, and fires a batch of
subtree-prune-regraft proposals.  All moves target whatever tempered density
the surrounding bridge currently defines, so the kernel is reusable across
the prior-annealing and insertion stages.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, inf, isfinite, log
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from ..engine import BridgeSpec, tempered_log_density
from .likelihood import CoalState
from .proposals import ProposalConfig
from .tree import spr_candidates, spr_reattach, with_height

__all__ = [
    "CoalScales",
    "CoalescentKernel",
    "adapt_scales",
    "default_scales",
    "height_move",
    "spr_move",
    "theta_move",
]


@dataclass(frozen=True)
class CoalScales:
    """Proposal standard deviations plus their adaptation multipliers."""

    sigma_theta: float
    sigma_heights: np.ndarray
    s_theta: float = 1.0
    s_heights: Optional[np.ndarray] = None

    def sigma_height(self, slot: int) -> float:
        n = self.sigma_heights.shape[0]
        # trees can outgrow the adapted vector mid-stage; reuse the last entry
        return float(self.sigma_heights[min(slot, n - 1)])


def _weighted_var(x: np.ndarray, w: np.ndarray) -> float:
    m = float(np.dot(w, x))
    return float(np.dot(w, (x - m) ** 2))


def _residual_var(y: np.ndarray, x: np.ndarray, w: np.ndarray) -> float:
    """Weighted variance of y after removing its linear trend in x."""
    vx = _weighted_var(x, w)
    if vx <= 0.0:
        return _weighted_var(y, w)
    mx, my = float(np.dot(w, x)), float(np.dot(w, y))
    slope = float(np.dot(w, (x - mx) * (y - my))) / vx
    return _weighted_var(y - slope * x, w)


def _stepped(s: float, rate: float) -> float:
    if rate > 0.6:
        return 2.0 * s
    if rate < 0.15:
        return 0.5 * s
    return s


def default_scales(states: list, weights: np.ndarray) -> CoalScales:
    return adapt_scales(states, weights, None, None)


def adapt_scales(
    states: list,
    weights: np.ndarray,
    scales: Optional[CoalScales],
    acceptance: Optional[dict],
) -> CoalScales:
    """Refit proposal variances to the cloud's spread.

    sigma_theta^2 tracks the weighted variance of log theta; each height slot
    tracks the residual variance of that coalescence height after a weighted
    linear regression on theta (heights co-move with the mutation rate, so the
    residual is the right local spread).  The per-scale multiplier doubles
    above 60% acceptance and halves below 15%; variances floor at 1e-12.
    """
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    thetas = np.array([s.theta for s in states])
    n_slots = min(s.tree.leaf_count for s in states) - 1
    s_theta = scales.s_theta if scales is not None else 1.0
    if scales is not None and scales.s_heights is not None and scales.s_heights.shape[0] == n_slots:
        s_heights = scales.s_heights.copy()
    else:
        s_heights = np.ones(max(n_slots, 1))
    if acceptance is not None:
        s_theta = _stepped(s_theta, acceptance["theta"])
        for i, rate in enumerate(acceptance["heights"][:n_slots]):
            s_heights[i] = _stepped(s_heights[i], rate)
    sigma_theta = np.sqrt(max(s_theta * _weighted_var(np.log(thetas), w), 1e-12))
    sig_h = np.ones(max(n_slots, 1))
    for i in range(n_slots):
        hs = np.array([s.tree.heights[i] for s in states])
        sig_h[i] = np.sqrt(max(s_heights[i] * _residual_var(hs, thetas, w), 1e-12))
    return CoalScales(float(sigma_theta), sig_h, float(s_theta), s_heights)


def _log_density(bridge: BridgeSpec, gamma: float, state: CoalState) -> float:
    return float(tempered_log_density(bridge, gamma, [state])[0])


def theta_move(
    state: CoalState,
    lp: float,
    bridge: BridgeSpec,
    gamma: float,
    sigma: float,
    rng: np.random.Generator,
) -> tuple[CoalState, float, bool]:
    """Multiplicative random walk; the log(theta'/theta) term is the walk's
    Jacobian on the positive half-line."""
    prop = state.with_theta(state.theta * exp(sigma * rng.standard_normal()))
    lp_new = _log_density(bridge, gamma, prop)
    log_ratio = lp_new - lp + log(prop.theta) - log(state.theta)
    if isfinite(log_ratio) and log(rng.random()) < log_ratio:
        return prop, lp_new, True
    return state, lp, False


def _truncnorm_logz(center, sigma, lo, hi):
    a = ndtr((lo - center) / sigma)
    b = 1.0 if hi == inf else ndtr((hi - center) / sigma)
    return (a, b, float(np.log(b - a)) if b > a else -inf)


def _truncnorm_draw(rng, center, sigma, lo, hi):
    a, b, log_z = _truncnorm_logz(center, sigma, lo, hi)
    if not isfinite(log_z):
        return None, -inf
    x = center + sigma * ndtri(a + rng.random() * (b - a))
    return float(x), log_z


def height_move(
    state: CoalState,
    lp: float,
    slot: int,
    bridge: BridgeSpec,
    gamma: float,
    sigma: float,
    rng: np.random.Generator,
) -> tuple[CoalState, float, bool]:
    """Truncated-normal step for one coalescence height, confined between the
    node's children and its parent; the two truncation normalisers enter the
    acceptance ratio."""
    tree = state.tree
    t = tree.leaf_count
    node = t + slot
    h = float(tree.heights[slot])
    lo = max(tree.node_height(int(c)) for c in tree.children[slot])
    p = int(tree.parent[node])
    hi = inf if p < 0 else tree.node_height(p)
    h_new, log_z_fwd = _truncnorm_draw(rng, h, sigma, lo, hi)
    if h_new is None or h_new == h or (h_new in tree.heights):
        return state, lp, False
    prop = state.with_tree(with_height(tree, slot, h_new))
    lp_new = _log_density(bridge, gamma, prop)
    # reverse normaliser uses the same bracket centred at the proposal
    _, _, log_z_rev = _truncnorm_logz(h_new, sigma, lo, hi)
    log_ratio = lp_new - lp + log_z_fwd - log_z_rev
    if isfinite(log_ratio) and log(rng.random()) < log_ratio:
        return prop, lp_new, True
    return state, lp, False


def spr_move(
    state: CoalState,
    lp: float,
    bridge: BridgeSpec,
    gamma: float,
    rng: np.random.Generator,
) -> tuple[CoalState, float, bool]:
    """Detach a uniform non-root subtree, regraft at the detachment height on
    a uniformly chosen branch alive there; Hastings ratio is the forward to
    reverse candidate-count ratio."""
    tree = state.tree
    t = tree.leaf_count
    if t < 3:
        return state, lp, False
    node = int(rng.integers(2 * t - 2))
    cands = spr_candidates(tree, node)
    if not cands:
        return state, lp, False
    branch = cands[int(rng.integers(len(cands)))]
    new_tree = spr_reattach(tree, node, branch)
    # the detached subtree keeps its height, which locates it after renumbering
    if node < t:
        new_node = node
    else:
        new_node = t + int(np.searchsorted(new_tree.heights, tree.node_height(node)))
    n_rev = len(spr_candidates(new_tree, new_node))
    prop = state.with_tree(new_tree)
    lp_new = _log_density(bridge, gamma, prop)
    log_ratio = lp_new - lp + log(len(cands)) - log(n_rev)
    if isfinite(log_ratio) and log(rng.random()) < log_ratio:
        return prop, lp_new, True
    return state, lp, False


class CoalescentKernel:
    """Engine-facing MCMC kernel; accumulates acceptance rates per sweep."""

    def __init__(self, proposal: ProposalConfig, scales: Optional[CoalScales] = None):
        self.proposal = proposal
        self.scales = scales
        self.sweep_stats: list[dict] = []

    def __call__(self, states, normalized_weights, gamma, bridge, rng_streams, sweeps):
        if self.scales is None:
            self.scales = default_scales(states, normalized_weights)
        info = {}
        for _ in range(sweeps):
            states, info = self._sweep(states, gamma, bridge, rng_streams)
            self.sweep_stats.append(info)
        return states, info

    def last_acceptance(self) -> Optional[dict]:
        return self.sweep_stats[-1] if self.sweep_stats else None

    def _sweep(self, states, gamma, bridge, rng_streams):
        scales = self.scales
        n_slots = max(s.tree.leaf_count for s in states) - 1
        acc_t = np.zeros(2)
        acc_h = np.zeros((n_slots, 2))
        acc_s = np.zeros(2)
        out = []
        for p, state in enumerate(states):
            rng = rng_streams[p]
            lp = _log_density(bridge, gamma, state)
            state, lp, ok = theta_move(state, lp, bridge, gamma, scales.sigma_theta, rng)
            acc_t += (ok, 1)
            for slot in range(state.tree.leaf_count - 1):
                state, lp, ok = height_move(
                    state, lp, slot, bridge, gamma, scales.sigma_height(slot), rng
                )
                acc_h[slot] += (ok, 1)
            for _ in range(self.proposal.spr_moves_per_sweep):
                state, lp, ok = spr_move(state, lp, bridge, gamma, rng)
                acc_s += (ok, 1)
            out.append(state)
        with np.errstate(invalid="ignore"):
            info = {
                "theta": acc_t[0] / acc_t[1],
                "heights": acc_h[:, 0] / np.maximum(acc_h[:, 1], 1),
                "height": float(acc_h[:, 0].sum() / max(acc_h[:, 1].sum(), 1)),
                "spr": float(acc_s[0] / acc_s[1]) if acc_s[1] else float("nan"),
            }
        return out, info

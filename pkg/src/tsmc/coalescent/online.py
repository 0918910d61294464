"""Online tree inference: one SMC stage per arriving sequence.

The 2-leaf posterior is reached by annealing from the prior; every later
sequence enters through the lineage-then-height insertion, whose pushed
forward density anchors the bridge that anneals into the grown posterior.
Proposal scales adapt between intermediate distributions, and each stage
snapshots the running evidence, a consensus tree and the acceptance rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isnan
from typing import Optional

import numpy as np

from ..engine import (
    BridgeSpec,
    ParticleCloud,
    SmcConfig,
    bridge_deltas,
    bridge_step,
    find_next_gamma,
    init_cloud,
)
from .consensus import majority_consensus
from .likelihood import CoalState, coalescent_log_prior, log_posterior, log_theta_prior
from .mcmc import CoalescentKernel, adapt_scales
from .proposals import (
    ProposalConfig,
    insertion_push_log_density,
    propose_insertion,
    snp_counts,
)
from .tree import NewickNode, two_leaf_tree

__all__ = ["OnlineResult", "StageRecord", "run_online_inference", "sample_prior_states"]


@dataclass(frozen=True)
class StageRecord:
    """Per-arrival snapshot: cumulative evidence and stage diagnostics."""

    t: int
    log_evidence: float
    n_intermediate: int
    ess_min: float
    accept_theta: float
    accept_height: float
    accept_spr: float
    consensus: NewickNode


@dataclass
class OnlineResult:
    stages: list[StageRecord]
    cloud: ParticleCloud
    names: list[str]

    @property
    def log_evidences(self) -> list[float]:
        return [r.log_evidence for r in self.stages]


def sample_prior_states(rng: np.random.Generator, count: int) -> list[CoalState]:
    """Two-leaf prior draws: Exp(1) coalescence height, Gamma(1,5) rate."""
    return [
        CoalState(two_leaf_tree(rng.exponential(1.0)), rng.gamma(1.0, 0.2))
        for _ in range(count)
    ]


def _mean_rate(stats: list[dict], key: str) -> float:
    vals = [s[key] for s in stats if not isnan(s[key])]
    return float(np.mean(vals)) if vals else float("nan")


def _anneal_stage(cloud, bridge, config, kernel, bridge_index):
    """Drive one bridge to gamma=1, adapting scales after every step."""
    trace_start = len(cloud.trace)
    stats_start = len(kernel.sweep_stats)
    step = 0
    while bridge.gamma < 1.0:
        delta = bridge_deltas(bridge, cloud.states)
        gamma_next = find_next_gamma(
            cloud, bridge, bridge.gamma, config.cess_target, delta=delta
        )
        bridge_step(
            cloud,
            bridge,
            gamma_next,
            config,
            bridge_index=bridge_index,
            step_index=step,
            delta=delta,
        )
        kernel.scales = adapt_scales(
            cloud.states,
            cloud.normalized_weights(),
            kernel.scales,
            kernel.last_acceptance(),
        )
        step += 1
    rows = cloud.trace[trace_start:]
    stats = kernel.sweep_stats[stats_start:]
    return rows, stats


def _stage_record(t, cloud, rows, stats, names, height_stat) -> StageRecord:
    consensus = majority_consensus(
        cloud.states, cloud.normalized_weights(), names[:t], height_stat
    )
    return StageRecord(
        t=t,
        log_evidence=cloud.log_evidence,
        n_intermediate=len(rows),
        ess_min=min(row.ess for row in rows),
        accept_theta=_mean_rate(stats, "theta"),
        accept_height=_mean_rate(stats, "height"),
        accept_spr=_mean_rate(stats, "spr"),
        consensus=consensus,
    )


def run_online_inference(
    alignment: np.ndarray,
    config: SmcConfig,
    proposal: ProposalConfig = ProposalConfig(),
    order: Optional[list[int]] = None,
    names: Optional[list[str]] = None,
    height_stat: str = "median",
) -> OnlineResult:
    """Assimilate sequences one at a time, returning per-stage records.

    ``order`` permutes the alignment rows into arrival order; names follow.
    The evidence column is cumulative: after stage t it estimates the marginal
    likelihood of the first t sequences.
    """
    alignment = np.asarray(alignment)
    total, n_sites = alignment.shape
    if total < 2:
        raise ValueError("need at least two sequences")
    if order is None:
        order = list(range(total))
    if sorted(order) != list(range(total)):
        raise ValueError("order must be a permutation of the sequence indices")
    if names is None:
        names = [str(i) for i in range(total)]
    alignment = alignment[order]
    names = [names[i] for i in order]

    rng = np.random.default_rng(config.seed)
    cloud = init_cloud(sample_prior_states(rng, config.particle_count), config)
    kernel = CoalescentKernel(proposal)

    def log_prior(states):
        return np.array(
            [coalescent_log_prior(s.tree) + log_theta_prior(s.theta) for s in states]
        )

    def posterior_at(t):
        data = alignment[:t]
        return lambda states: np.array([log_posterior(s, data) for s in states])

    stages = []
    bridge = BridgeSpec(
        log_target_from=log_prior,
        log_target_to=posterior_at(2),
        mcmc_kernel=kernel,
    )
    rows, stats = _anneal_stage(cloud, bridge, config, kernel, bridge_index=0)
    stages.append(_stage_record(2, cloud, rows, stats, names, height_stat))

    for t in range(3, total + 1):
        counts = snp_counts(alignment[: t - 1], alignment[t - 1])
        reduced = alignment[: t - 1]
        cloud.states = [
            propose_insertion(state, counts, n_sites, proposal, stream)
            for state, stream in zip(cloud.states, cloud.rng_streams)
        ]

        def push(states, reduced=reduced, counts=counts):
            return np.array(
                [
                    insertion_push_log_density(s, reduced, counts, n_sites, proposal)
                    for s in states
                ]
            )

        bridge = BridgeSpec(
            log_target_from=push,
            log_target_to=posterior_at(t),
            mcmc_kernel=kernel,
        )
        rows, stats = _anneal_stage(cloud, bridge, config, kernel, bridge_index=t - 2)
        stages.append(_stage_record(t, cloud, rows, stats, names, height_stat))
    return OnlineResult(stages=stages, cloud=cloud, names=names)

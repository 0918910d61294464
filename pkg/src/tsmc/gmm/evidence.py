"""Evidence estimation across mixture sizes.

Two routes to log Z_k:

    smc2_baseline      prior-to-posterior annealing inside a fixed model,
                       repeated from scratch for every k
    tsmc_model_sweep   anneal model 1 once, then hop k -> k+1 through birth
                       or split transformations, bridging each hop

The sweep accumulates evidence across hops, so log Z_{k+1} is log Z_k plus
the bridge increment; the returned per-model snapshots share that ladder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from tsmc.engine import BridgeSpec, ParticleCloud, SmcConfig, init_cloud, run_transformation_sequence
from tsmc.gmm.mcmc import make_mixture_kernel
from tsmc.gmm.model import (
    GmmData,
    MixtureCloud,
    cloud_log_posterior,
    cloud_log_prior_ordered,
    sample_prior_cloud,
)
from tsmc.gmm.transforms import birth_transform_cloud, split_transform_cloud
from tsmc.gmm.weights import (
    birth_push_log_density,
    birth_target_log_density,
    sample_birth_aux,
    sample_split_aux,
    split_push_log_density,
    split_target_log_density,
)

__all__ = ["ModelEvidence", "SweepResult", "smc2_baseline", "tsmc_model_sweep"]


@dataclass(frozen=True)
class ModelEvidence:
    model_k: int
    log_evidence: float
    n_intermediate: int


@dataclass
class SweepResult:
    models: list[ModelEvidence] = field(default_factory=list)
    snapshots: list[ParticleCloud] = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def log_evidences(self) -> np.ndarray:
        return np.array([m.log_evidence for m in self.models])


def _count_steps(cloud: ParticleCloud, bridge_index: int) -> int:
    return sum(1 for row in cloud.trace if row.bridge == bridge_index)


def _posterior_bridge(scheme: str, transform=None, **densities) -> BridgeSpec:
    return BridgeSpec(
        transform=transform,
        mcmc_kernel=make_mixture_kernel(scheme),
        **densities,
    )


def smc2_baseline(
    k: int,
    data: GmmData,
    config: SmcConfig,
    *,
    scheme: str = "covariance_scaled",
    return_cloud: bool = False,
):
    """Prior-to-posterior annealed evidence for the k-component model."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(config.seed)
    cloud = init_cloud(sample_prior_cloud(rng, config.particle_count, k, data), config)
    bridge = _posterior_bridge(
        scheme,
        log_target_from=lambda c: cloud_log_prior_ordered(c, data),
        log_target_to=lambda c: cloud_log_posterior(c, data),
    )
    _, (log_z,) = run_transformation_sequence(cloud, [bridge], config)
    if return_cloud:
        return log_z, cloud
    return log_z


def _draw_birth_transform(data: GmmData, streams):
    def transform(states: MixtureCloud) -> MixtureCloud:
        k = states.k
        aux = np.array([sample_birth_aux(s, k, data) for s in streams])
        w, mu, tau, pos = birth_transform_cloud(
            states.weights, states.means, states.precisions, aux[:, 0], aux[:, 1], aux[:, 2]
        )
        return MixtureCloud(weights=w, means=mu, precisions=tau, labels=pos)

    return transform


def _draw_split_transform(streams):
    def transform(states: MixtureCloud) -> MixtureCloud:
        k = states.k
        draws = [sample_split_aux(s, k) for s in streams]
        w, mu, tau, pairs = split_transform_cloud(
            states.weights,
            states.means,
            states.precisions,
            np.array([d.component for d in draws], dtype=np.intp),
            np.array([d.u1 for d in draws]),
            np.array([d.u2 for d in draws]),
            np.array([d.u3 for d in draws]),
        )
        return MixtureCloud(weights=w, means=mu, precisions=tau, labels=pairs)

    return transform


def tsmc_model_sweep(
    data: GmmData,
    T_max: int,
    move: str,
    mode: str,
    config: SmcConfig,
    *,
    scheme: str = "covariance_scaled",
) -> SweepResult:
    """Evidence for k = 1..T_max via transformation hops from the model-1 fit."""
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    if move not in ("birth", "split"):
        raise ValueError("move must be birth|split")
    if mode not in ("conditional", "marginal"):
        raise ValueError("mode must be conditional|marginal")

    log_z1, cloud = smc2_baseline(1, data, config, scheme=scheme, return_cloud=True)
    result = SweepResult()
    result.models.append(ModelEvidence(1, log_z1, _count_steps(cloud, 0)))
    result.snapshots.append(cloud.snapshot())

    if move == "birth":
        push, target = birth_push_log_density, birth_target_log_density
    else:
        push, target = split_push_log_density, split_target_log_density

    bridges = []
    for k in range(1, T_max):
        transform = (
            _draw_birth_transform(data, cloud.rng_streams)
            if move == "birth"
            else _draw_split_transform(cloud.rng_streams)
        )
        bridges.append(
            _posterior_bridge(
                scheme,
                transform=transform,
                log_target_from=lambda c: push(c, data, mode),
                log_target_to=lambda c: target(c, data, mode),
            )
        )
    snapshots, evidences = run_transformation_sequence(
        cloud, bridges, config, first_bridge_index=1
    )
    for k, (snap, log_z) in enumerate(zip(snapshots, evidences), start=2):
        result.models.append(ModelEvidence(k, log_z, _count_steps(cloud, k - 1)))
        result.snapshots.append(snap)
    result.trace = list(cloud.trace)
    return result

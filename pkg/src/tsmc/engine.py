"""Generic SMC sampler engine with deterministic transformations.

The engine owns the particle-cloud bookkeeping: log-weights, the running
log-evidence accumulator, per-particle RNG streams, stratified resampling and
the adaptive placement of geometric intermediate distributions by conditional
ESS.  Everything problem-specific (densities, transformations, MCMC kernels)
arrives through :class:`BridgeSpec` callables operating on an opaque state
container.

A bridge anneals from ``log_target_from`` (the pushed-forward source density,
Jacobian included) to ``log_target_to`` through the geometric family

    phi_gamma = gamma * log_target_to + (1 - gamma) * log_target_from,

with gamma placed so that each step's CESS equals ``beta * P``.  Weight
updates between consecutive gammas are ``(gamma' - gamma) * (log_target_to -
log_target_from)`` evaluated at the *current* particles, so the increments
telescope to the full Jacobian-corrected importance weight of the hop.

State containers are opaque to the engine.  Supported shapes: a numpy array
whose leading axis indexes particles, any object with a ``take(indices)``
method returning a new container, or a plain list.  Application code should
treat particle states as immutable and rebind rather than mutate, so that
resampled duplicates can diverge and snapshots stay valid.

All reductions go through a log-sum-exp that sums contributions in sorted
order when ``deterministic_reduction`` is on, making the accumulated evidence
invariant under particle permutation and bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "BridgeSpec",
    "DegenerateCloudError",
    "ParticleCloud",
    "SmcConfig",
    "TraceRow",
    "bridge_deltas",
    "bridge_step",
    "cess",
    "ess",
    "find_next_gamma",
    "init_cloud",
    "log_sum_exp",
    "normalize_and_accumulate",
    "run_transformation_sequence",
    "stratified_resample",
    "take_states",
    "tempered_log_density",
]


class DegenerateCloudError(RuntimeError):
    """Raised when every particle carries zero posterior mass."""


def log_sum_exp(values: Sequence[float], deterministic: bool = True) -> float:
    """log(sum(exp(values))), overflow-safe.

    With ``deterministic=True`` the exponentials are summed in sorted order,
    which makes the result invariant under permutation of the inputs.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return -math.inf
    m = float(np.max(x))
    if not np.isfinite(m):
        # all -inf (or a NaN slipped through); both map to "no mass here"
        return -math.inf if m == -math.inf else math.nan
    s = np.exp(x - m)
    if deterministic:
        s = np.sort(s)
    return m + math.log(float(s.sum()))


def ess(log_weights: Sequence[float]) -> float:
    """Effective sample size (sum w)^2 / sum w^2 of unnormalised log-weights."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise DegenerateCloudError("degenerate cloud: all weights are zero")
    return float(np.exp(2.0 * log_sum_exp(lw) - log_sum_exp(2.0 * lw)))


def cess(
    normalized_weights: Sequence[float],
    incremental_log_weights: Sequence[float],
) -> float:
    """Conditional ESS  P * (sum w*omega)^2 / sum w*omega^2.

    ``normalized_weights`` are linear-scale weights summing to one;
    ``incremental_log_weights`` hold log(omega).
    """
    w = np.asarray(normalized_weights, dtype=float)
    ilw = np.asarray(incremental_log_weights, dtype=float)
    if w.shape != ilw.shape or w.ndim != 1:
        raise ValueError("weight vectors must be 1-d and of equal length")
    with np.errstate(divide="ignore"):
        lw = np.log(w)
    num = log_sum_exp(lw + ilw)
    den = log_sum_exp(lw + 2.0 * ilw)
    if not np.isfinite(den):
        raise DegenerateCloudError("all incremental weights vanish")
    return float(w.size * np.exp(2.0 * num - den))


def stratified_resample(
    normalized_weights: Sequence[float], rng: np.random.Generator
) -> np.ndarray:
    """Stratified resampling: u_p ~ U((p-1)/P, p/P), ancestor by inverse CDF."""
    w = np.asarray(normalized_weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d vector")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("negative or non-finite weight")
    total = w.sum()
    if total <= 0.0:
        raise DegenerateCloudError("degenerate cloud: all weights are zero")
    P = w.size
    u = (np.arange(P) + rng.random(P)) / P
    cdf = np.cumsum(w / total)
    cdf[-1] = 1.0  # guard against rounding in the last stratum
    return np.searchsorted(cdf, u, side="left").astype(np.intp)


def take_states(states: Any, indices: np.ndarray) -> Any:
    """Gather particle states by ancestor index, container-agnostically."""
    if isinstance(states, np.ndarray):
        return states[indices]
    if hasattr(states, "take"):
        return states.take(indices)
    return [states[i] for i in indices]


def _state_count(states: Any) -> int:
    return len(states)


# ---------------------------------------------------------------------------
# configuration and cloud containers


@dataclass(frozen=True)
class SmcConfig:
    """Engine tunables shared by every application."""

    particle_count: int
    resample_threshold: float = 0.5
    cess_target: float = 0.99
    mcmc_sweeps_per_step: int = 1
    seed: int = 0
    deterministic_reduction: bool = True

    def __post_init__(self) -> None:
        if self.particle_count < 1:
            raise ValueError("particle_count must be >= 1")
        if not 0.0 < self.resample_threshold < 1.0:
            raise ValueError("resample_threshold out of range (0, 1)")
        if not 0.0 < self.cess_target < 1.0:
            raise ValueError("cess_target out of range (0, 1)")
        if self.mcmc_sweeps_per_step < 0:
            raise ValueError("mcmc_sweeps_per_step must be >= 0")


@dataclass(frozen=True)
class TraceRow:
    """One reweight step: (bridge, step, gamma, ess, cess, resampled, log_evidence)."""

    bridge: int
    step: int
    gamma: float
    ess: float
    cess: float
    resampled: bool
    log_evidence: float


# Kernel signature: (states, normalized_weights, gamma, bridge, rng_streams,
# sweeps) -> (new_states, info dict).  Kernels must leave weights untouched and
# be invariant for the tempered density at the given gamma.
McmcKernel = Callable[
    [Any, np.ndarray, float, "BridgeSpec", list, int], tuple[Any, dict]
]


@dataclass
class BridgeSpec:
    """One hop between unnormalised targets, plus its annealing state.

    ``log_target_from`` must be the pushed-forward source density evaluated at
    destination-space states, i.e. it already contains the inverse-map
    Jacobian; for an identity transform ``log_abs_jacobian`` is identically 0
    and ``log_target_from`` is just the source target.
    """

    log_target_from: Callable[[Any], np.ndarray]
    log_target_to: Callable[[Any], np.ndarray]
    transform: Optional[Callable[[Any], Any]] = None
    log_abs_jacobian: Optional[Callable[[Any], np.ndarray]] = None
    mcmc_kernel: Optional[McmcKernel] = None
    gamma: float = 0.0


@dataclass
class ParticleCloud:
    """P weighted states, their RNG streams and the evidence accumulator."""

    states: Any
    log_weights: np.ndarray
    rng_streams: list
    engine_rng: np.random.Generator
    log_evidence: float = 0.0
    deterministic_reduction: bool = True
    trace: list = field(default_factory=list)

    @property
    def particle_count(self) -> int:
        return len(self.log_weights)

    def normalized_weights(self) -> np.ndarray:
        lw = self.log_weights - log_sum_exp(
            self.log_weights, self.deterministic_reduction
        )
        return np.exp(lw)

    def snapshot(self) -> "ParticleCloud":
        """A read-only copy of states/weights; RNG streams stay shared."""
        idx = np.arange(self.particle_count)
        return ParticleCloud(
            states=take_states(self.states, idx),
            log_weights=self.log_weights.copy(),
            rng_streams=self.rng_streams,
            engine_rng=self.engine_rng,
            log_evidence=self.log_evidence,
            deterministic_reduction=self.deterministic_reduction,
        )


def init_cloud(states: Any, config: SmcConfig) -> ParticleCloud:
    """Equal-weight cloud with per-particle streams split from the seed.

    Streams are bound to particle slots, not lineages: after resampling,
    slot p keeps its stream, so the randomness a particle consumes is
    independent of the ancestry realised by the resampler.
    """
    P = config.particle_count
    if _state_count(states) != P:
        raise ValueError("states length does not match particle_count")
    children = np.random.SeedSequence(config.seed).spawn(P + 1)
    engine_rng = np.random.default_rng(children[0])
    streams = [np.random.default_rng(c) for c in children[1:]]
    return ParticleCloud(
        states=states,
        log_weights=np.full(P, -math.log(P)),
        rng_streams=streams,
        engine_rng=engine_rng,
        deterministic_reduction=config.deterministic_reduction,
    )


# ---------------------------------------------------------------------------
# densities and increments


def _sanitize_log_density(values: Any, P: int) -> np.ndarray:
    out = np.asarray(values, dtype=float)
    if out.shape != (P,):
        out = out.reshape(P)
    # a non-finite target log-density kills the particle instead of crashing
    out = np.where(np.isnan(out) | np.isposinf(out), -np.inf, out)
    return out


def bridge_deltas(bridge: BridgeSpec, states: Any) -> np.ndarray:
    """Per-particle log_target_to - log_target_from, with dead particles at -inf."""
    P = _state_count(states)
    lt = _sanitize_log_density(bridge.log_target_to(states), P)
    lf = _sanitize_log_density(bridge.log_target_from(states), P)
    with np.errstate(invalid="ignore"):
        delta = lt - lf
    return np.where(np.isnan(delta) | np.isposinf(delta), -np.inf, delta)


def scaled_increment(delta: np.ndarray, factor: float) -> np.ndarray:
    """factor * delta with the 0 * (-inf) corner pinned to 0."""
    if factor == 0.0:
        return np.zeros_like(delta)
    if factor < 0.0:
        raise ValueError("gamma must not decrease")
    return factor * delta


def tempered_log_density(bridge: BridgeSpec, gamma: float, states: Any) -> np.ndarray:
    """gamma * log_target_to + (1-gamma) * log_target_from at the given states."""
    P = _state_count(states)
    if gamma >= 1.0:
        return _sanitize_log_density(bridge.log_target_to(states), P)
    if gamma <= 0.0:
        return _sanitize_log_density(bridge.log_target_from(states), P)
    lt = _sanitize_log_density(bridge.log_target_to(states), P)
    lf = _sanitize_log_density(bridge.log_target_from(states), P)
    return gamma * lt + (1.0 - gamma) * lf


def normalize_and_accumulate(
    cloud: ParticleCloud, incremental_log_weights: Sequence[float]
) -> ParticleCloud:
    """Fold incremental weights into the cloud and bump the evidence.

    The evidence increment is log sum_p w_p exp(omega_p) over previously
    normalised weights, recorded before any resampling, so skipped-resampling
    steps are handled by the weight-carrying form automatically.
    """
    ilw = np.asarray(incremental_log_weights, dtype=float)
    if np.any(np.isposinf(ilw)):
        raise ValueError("incremental log weight is +inf")
    ilw = np.where(np.isnan(ilw), -np.inf, ilw)
    det = cloud.deterministic_reduction
    lw = cloud.log_weights - log_sum_exp(cloud.log_weights, det)
    combined = lw + ilw
    increment = log_sum_exp(combined, det)
    if not np.isfinite(increment):
        raise DegenerateCloudError("all incremental weights vanish")
    cloud.log_evidence += increment
    cloud.log_weights = combined - increment
    return cloud


def find_next_gamma(
    cloud: ParticleCloud,
    bridge: BridgeSpec,
    gamma_current: float,
    beta: float,
    *,
    delta: Optional[np.ndarray] = None,
    gamma_tol: float = 1e-8,
    cess_tol_factor: float = 1e-6,
    max_iter: int = 200,
) -> float:
    """Smallest gamma in (gamma_current, 1] whose CESS hits beta * P.

    Bisection on the (empirically monotone) CESS curve; on non-monotone
    curves this converges to the first bracketing root.  Returns 1.0 when the
    terminal step already satisfies the target.  The accepted gamma obeys both
    an interval tolerance of ``gamma_tol`` and |CESS - beta*P| <=
    ``cess_tol_factor * P``.
    """
    if not 0.0 <= gamma_current < 1.0:
        raise ValueError("gamma_current must lie in [0, 1)")
    if delta is None:
        delta = bridge_deltas(bridge, cloud.states)
    P = cloud.particle_count
    target = beta * P
    w = cloud.normalized_weights()

    def cess_at(g: float) -> float:
        return cess(w, scaled_increment(delta, g - gamma_current))

    if cess_at(1.0) >= target:
        return 1.0
    lo, hi = gamma_current, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if cess_at(mid) >= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= gamma_tol and abs(cess_at(lo) - target) <= cess_tol_factor * P:
            break
    if lo <= gamma_current:
        lo = float(np.nextafter(gamma_current, 1.0))
        logger.warning(
            "tempering stalled at gamma=%.12g; forcing a machine-epsilon step",
            gamma_current,
        )
    return float(lo)


def bridge_step(
    cloud: ParticleCloud,
    bridge: BridgeSpec,
    gamma_next: float,
    config: SmcConfig,
    *,
    bridge_index: int = 0,
    step_index: int = 0,
    resample: str = "adaptive",
    delta: Optional[np.ndarray] = None,
    sweeps: Optional[int] = None,
) -> ParticleCloud:
    """One reweight / (resample) / move step of the annealing ladder.

    Reweights by (gamma_next - bridge.gamma) * delta, accumulates evidence
    *before* resampling, resamples iff ESS < alpha * P (or per the explicit
    ``resample`` override, used by fixed-schedule studies), then runs the
    bridge's MCMC kernel at gamma_next.
    """
    if resample not in ("adaptive", "always", "never"):
        raise ValueError("resample must be adaptive|always|never")
    if delta is None:
        delta = bridge_deltas(bridge, cloud.states)
    ilw = scaled_increment(np.asarray(delta, dtype=float), gamma_next - bridge.gamma)
    cess_val = cess(cloud.normalized_weights(), ilw)
    normalize_and_accumulate(cloud, ilw)
    ess_val = ess(cloud.log_weights)
    P = cloud.particle_count
    do_resample = {
        "adaptive": ess_val < config.resample_threshold * P,
        "always": True,
        "never": False,
    }[resample]
    if do_resample:
        ancestors = stratified_resample(cloud.normalized_weights(), cloud.engine_rng)
        cloud.states = take_states(cloud.states, ancestors)
        cloud.log_weights = np.full(P, -math.log(P))
    bridge.gamma = float(gamma_next)
    n_sweeps = config.mcmc_sweeps_per_step if sweeps is None else sweeps
    if bridge.mcmc_kernel is not None and n_sweeps > 0:
        cloud.states, _ = bridge.mcmc_kernel(
            cloud.states,
            cloud.normalized_weights(),
            bridge.gamma,
            bridge,
            cloud.rng_streams,
            n_sweeps,
        )
    cloud.trace.append(
        TraceRow(
            bridge=bridge_index,
            step=step_index,
            gamma=float(gamma_next),
            ess=ess_val,
            cess=cess_val,
            resampled=do_resample,
            log_evidence=cloud.log_evidence,
        )
    )
    return cloud


def run_transformation_sequence(
    initial_cloud: ParticleCloud,
    bridges: Sequence[BridgeSpec],
    config: SmcConfig,
    *,
    first_bridge_index: int = 0,
) -> tuple[list[ParticleCloud], list[float]]:
    """Drive the cloud through each bridge's full adaptive gamma ladder.

    For every bridge: apply the transformation to all particles, then anneal
    gamma from 0 to exactly 1 with CESS-placed steps, and snapshot the cloud
    and cumulative log-evidence.  The input cloud is mutated in place; the
    returned snapshots share RNG streams with it.
    """
    cloud = initial_cloud
    clouds: list[ParticleCloud] = []
    evidences: list[float] = []
    for b, bridge in enumerate(bridges):
        if bridge.gamma != 0.0:
            raise ValueError("bridges must start at gamma = 0")
        if bridge.transform is not None:
            cloud.states = bridge.transform(cloud.states)
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
                bridge_index=first_bridge_index + b,
                step_index=step,
                delta=delta,
            )
            step += 1
        clouds.append(cloud.snapshot())
        evidences.append(cloud.log_evidence)
    return clouds, evidences

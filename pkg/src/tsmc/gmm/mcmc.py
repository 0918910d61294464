"""Random-walk Metropolis moves for mixture clouds.

Proposals live in an unconstrained chart: logit-weights relative to the last
component, raw means, log-precisions.  The acceptance ratio carries the chart
Jacobian sum(log w) + sum(log tau) so the chain is invariant for the density
expressed in the original parameters.

Two adaptation schemes, chosen per sweep from the weighted particle set:

    acceptance_tuned    rescale the proposal covariance by (rate / 0.2) until
                        the observed acceptance rate sits near 0.2
    covariance_scaled   covariance = weighted empirical covariance divided by
                        the component count of the states being moved

covariance_scaled is the default everywhere downstream.
"""

from __future__ import annotations

import numpy as np

from tsmc.engine import tempered_log_density
from tsmc.gmm.model import MixtureCloud

__all__ = [
    "ACCEPT_TARGET",
    "acceptance_rescale",
    "make_mixture_kernel",
    "mcmc_sweep",
    "pack_cloud",
    "unpack_cloud",
    "weighted_covariance",
]

ACCEPT_TARGET = 0.2


# ---------------------------------------------------------------------------
# chart


def pack_cloud(cloud: MixtureCloud) -> np.ndarray:
    """(P, 3k-1) unconstrained coordinates; no weight columns when k = 1."""
    k = cloud.k
    cols = []
    if k > 1:
        cols.append(np.log(cloud.weights[:, :-1]) - np.log(cloud.weights[:, -1:]))
    cols.append(cloud.means)
    cols.append(np.log(cloud.precisions))
    return np.concatenate(cols, axis=1)


def unpack_cloud(coords: np.ndarray, template: MixtureCloud) -> MixtureCloud:
    """Inverse of :func:`pack_cloud`; labels/aux carried over unchanged."""
    k = template.k
    if k > 1:
        logits = np.concatenate(
            [coords[:, : k - 1], np.zeros((coords.shape[0], 1))], axis=1
        )
        logits = logits - logits.max(axis=1, keepdims=True)
        ew = np.exp(logits)
        weights = ew / ew.sum(axis=1, keepdims=True)
        rest = coords[:, k - 1 :]
    else:
        weights = np.ones((coords.shape[0], 1))
        rest = coords
    return template.with_params(
        weights=weights, means=rest[:, :k], precisions=np.exp(rest[:, k:])
    )


def _chart_log_jacobian(cloud: MixtureCloud) -> np.ndarray:
    # |d(w, tau) / d(logit, log tau)| = prod(w) * prod(tau)
    return np.log(cloud.weights).sum(axis=1) + np.log(cloud.precisions).sum(axis=1)


# ---------------------------------------------------------------------------
# covariance adaptation


def weighted_covariance(coords: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted empirical covariance, regularised against singularity."""
    if coords.shape[0] == 1:
        cov = np.zeros((coords.shape[1], coords.shape[1]))
    else:
        cov = np.atleast_2d(np.cov(coords, rowvar=False, aweights=weights, ddof=0))
    return cov + 1e-10 * np.eye(coords.shape[1])


def acceptance_rescale(sigma: np.ndarray, rate: float) -> np.ndarray:
    """Scheme A update: rate 0.40 doubles the covariance."""
    # a dead chain (rate 0) must not collapse the scale permanently
    return sigma * (max(rate, 0.01) / ACCEPT_TARGET)


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    jitter = 0.0
    for _ in range(6):
        try:
            return np.linalg.cholesky(sigma + jitter * np.eye(sigma.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0.0 else jitter * 100.0
    raise np.linalg.LinAlgError("proposal covariance is not positive definite")


# ---------------------------------------------------------------------------
# one Metropolis pass over the cloud


def _rw_pass(cloud, log_target, chol, rng_streams):
    coords = pack_cloud(cloud)
    P, D = coords.shape
    steps = np.empty((P, D))
    log_u = np.empty(P)
    for p in range(P):
        steps[p] = rng_streams[p].standard_normal(D)
        log_u[p] = np.log(rng_streams[p].random())
    proposal = unpack_cloud(coords + steps @ chol.T, cloud)
    lp0 = log_target(cloud) + _chart_log_jacobian(cloud)
    lp1 = log_target(proposal) + _chart_log_jacobian(proposal)
    with np.errstate(invalid="ignore"):
        ratio = lp1 - lp0
    accept = np.where(np.isnan(ratio), False, log_u < ratio)
    pick = lambda new, old: np.where(accept[:, None], new, old)
    moved = cloud.with_params(
        weights=pick(proposal.weights, cloud.weights),
        means=pick(proposal.means, cloud.means),
        precisions=pick(proposal.precisions, cloud.precisions),
    )
    return moved, float(accept.mean())


def mcmc_sweep(
    cloud: MixtureCloud,
    log_target,
    scheme: str,
    rng_streams,
    weights: np.ndarray | None = None,
    accept_band: float = 0.05,
    max_rounds: int = 5,
):
    """One adaptive Metropolis sweep; returns (cloud, info).

    ``log_target`` maps a MixtureCloud to per-particle log densities.
    ``weights`` are the normalized particle weights used for the empirical
    covariance (uniform when omitted).
    """
    P = len(cloud)
    if weights is None:
        weights = np.full(P, 1.0 / P)
    sigma = weighted_covariance(pack_cloud(cloud), weights)
    if scheme == "covariance_scaled":
        sigma = sigma / cloud.k
        cloud, rate = _rw_pass(cloud, log_target, _cholesky(sigma), rng_streams)
        return cloud, {"acceptance": rate, "rounds": 1, "sigma": sigma}
    if scheme != "acceptance_tuned":
        raise ValueError("scheme must be acceptance_tuned|covariance_scaled")
    rate = float("nan")
    for rounds in range(1, max_rounds + 1):
        cloud, rate = _rw_pass(cloud, log_target, _cholesky(sigma), rng_streams)
        if abs(rate - ACCEPT_TARGET) <= accept_band:
            break
        sigma = acceptance_rescale(sigma, rate)
    return cloud, {"acceptance": rate, "rounds": rounds, "sigma": sigma}


def make_mixture_kernel(scheme: str = "covariance_scaled"):
    """Engine-facing kernel for a fixed adaptation scheme."""

    def kernel(states, normalized_weights, gamma, bridge, rng_streams, sweeps):
        log_target = lambda c: tempered_log_density(bridge, gamma, c)
        info = {}
        for _ in range(sweeps):
            states, info = mcmc_sweep(
                states, log_target, scheme, rng_streams, weights=normalized_weights
            )
        return states, info

    return kernel

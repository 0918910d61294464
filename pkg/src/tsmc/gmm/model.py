"""Mixture states, data summaries, priors and unnormalised posteriors.

Priors, given the data mean m and data range S:

    mu_s  ~ Normal(m, S^2)          independently per component
    tau_s ~ Gamma(shape 2, rate 2 S^2 / 100)
    nu    ~ Dirichlet(1, ..., 1)    density (k-1)! on the simplex

The ordered target multiplies the product prior by k! and an indicator that
the means are strictly ascending, so its normalising constant equals the
evidence of the unconstrained mixture.

Cloud-level evaluators take a :class:`MixtureCloud` (arrays with a leading
particle axis) and return one value per particle; the engine and the MCMC
kernel only ever touch those.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "GmmData",
    "MixtureCloud",
    "MixtureState",
    "TAU_SHAPE",
    "cloud_log_likelihood",
    "cloud_log_posterior",
    "cloud_log_prior_ordered",
    "log_likelihood",
    "log_posterior_unnorm",
    "log_prior_ordered",
    "tau_rate",
]

_LOG_2PI = float(np.log(2.0 * np.pi))

TAU_SHAPE = 2.0


def tau_rate(S: float) -> float:
    """Rate of the precision prior; keeps component sd near S/10."""
    return 2.0 * S * S / 100.0


@dataclass(frozen=True)
class GmmData:
    """Observations plus the data summaries the priors hinge on."""

    observations: np.ndarray
    m: float
    S: float

    @classmethod
    def from_observations(cls, y) -> "GmmData":
        y = np.asarray(y, dtype=float).ravel()
        if y.size == 0:
            raise ValueError("no observations")
        if not np.all(np.isfinite(y)):
            raise ValueError("non-finite observation")
        S = float(y.max() - y.min())
        if S <= 0.0:
            raise ValueError("data range must be positive")
        return cls(observations=y, m=float(y.mean()), S=S)


@dataclass(frozen=True)
class MixtureState:
    """One k-component parameter point."""

    weights: np.ndarray
    means: np.ndarray
    precisions: np.ndarray

    @property
    def k(self) -> int:
        return self.weights.size

    def validate(self) -> None:
        w, mu, tau = self.weights, self.means, self.precisions
        if not (w.shape == mu.shape == tau.shape and w.ndim == 1 and w.size >= 1):
            raise ValueError("component arrays must be 1-d and aligned")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if np.any(w <= 0.0):
            raise ValueError("weights must be strictly positive")
        if np.any(np.diff(mu) <= 0.0):
            raise ValueError("means must be strictly ascending")
        if np.any(tau <= 0.0):
            raise ValueError("precisions must be positive")


@dataclass
class MixtureCloud:
    """Batched mixture states: arrays of shape (P, k).

    ``labels`` freeze the discrete route of a conditional-mode hop: the
    inserted component's position for birth ((P,) ints) or the child pair for
    split ((P, 2) ints).  ``aux``/``route`` carry pre-transform draws on
    source-side clouds and are dropped by the transform.
    """

    weights: np.ndarray
    means: np.ndarray
    precisions: np.ndarray
    labels: Optional[np.ndarray] = None
    aux: Optional[np.ndarray] = None
    route: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def k(self) -> int:
        return self.weights.shape[1]

    def take(self, idx) -> "MixtureCloud":
        pick = lambda a: None if a is None else a[idx]
        return MixtureCloud(
            weights=self.weights[idx],
            means=self.means[idx],
            precisions=self.precisions[idx],
            labels=pick(self.labels),
            aux=pick(self.aux),
            route=pick(self.route),
        )

    def with_params(self, weights, means, precisions) -> "MixtureCloud":
        return MixtureCloud(
            weights=weights,
            means=means,
            precisions=precisions,
            labels=self.labels,
            aux=self.aux,
            route=self.route,
        )

    def state(self, p: int) -> MixtureState:
        return MixtureState(
            weights=self.weights[p].copy(),
            means=self.means[p].copy(),
            precisions=self.precisions[p].copy(),
        )

    @classmethod
    def from_states(cls, states: list[MixtureState]) -> "MixtureCloud":
        return cls(
            weights=np.stack([s.weights for s in states]),
            means=np.stack([s.means for s in states]),
            precisions=np.stack([s.precisions for s in states]),
        )


def _as_cloud(state: MixtureState) -> MixtureCloud:
    return MixtureCloud(
        weights=state.weights[None, :],
        means=state.means[None, :],
        precisions=state.precisions[None, :],
    )


# ---------------------------------------------------------------------------
# log-density pieces (batched over the particle axis)


def _log_normal(x, mean, sd):
    return -0.5 * _LOG_2PI - np.log(sd) - 0.5 * ((x - mean) / sd) ** 2


def _log_gamma_pdf(x, shape, rate):
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def cloud_log_likelihood(cloud: MixtureCloud, data: GmmData) -> np.ndarray:
    """Per-particle sum_i log sum_s nu_s N(y_i | mu_s, 1/tau_s)."""
    y = data.observations
    if y.size == 0:
        return np.zeros(len(cloud))
    mu = cloud.means[:, None, :]
    tau = cloud.precisions[:, None, :]
    comp = -0.5 * _LOG_2PI + 0.5 * np.log(tau) - 0.5 * tau * (y[None, :, None] - mu) ** 2
    site = logsumexp(comp + np.log(cloud.weights)[:, None, :], axis=2)
    return site.sum(axis=1)


def _cloud_log_prior_terms(cloud: MixtureCloud, data: GmmData) -> np.ndarray:
    k = cloud.k
    mu_term = _log_normal(cloud.means, data.m, data.S).sum(axis=1)
    tau_term = _log_gamma_pdf(cloud.precisions, TAU_SHAPE, tau_rate(data.S)).sum(axis=1)
    dirichlet = gammaln(k)  # log (k-1)!
    return mu_term + tau_term + dirichlet


def _ordered_mask(cloud: MixtureCloud) -> np.ndarray:
    if cloud.k == 1:
        return np.ones(len(cloud), dtype=bool)
    return np.all(np.diff(cloud.means, axis=1) > 0.0, axis=1)


def cloud_log_prior_ordered(cloud: MixtureCloud, data: GmmData) -> np.ndarray:
    """Normalised prior on the ordered-means region, k! factor included."""
    out = _cloud_log_prior_terms(cloud, data) + gammaln(cloud.k + 1)
    return np.where(_ordered_mask(cloud), out, -np.inf)


def cloud_log_posterior(cloud: MixtureCloud, data: GmmData) -> np.ndarray:
    """Unnormalised ordered posterior; -inf off the ordered region."""
    ordered = _ordered_mask(cloud)
    out = cloud_log_prior_ordered(cloud, data)
    lik = np.zeros(len(cloud))
    if np.any(ordered):
        lik = cloud_log_likelihood(cloud, data)
    out = out + np.where(ordered, lik, 0.0)
    return np.where(ordered, out, -np.inf)


# ---------------------------------------------------------------------------
# single-state entry points


def log_likelihood(state: MixtureState, data: GmmData) -> float:
    """Mixture log-likelihood of one state."""
    return float(cloud_log_likelihood(_as_cloud(state), data)[0])


def log_prior_ordered(state: MixtureState, data: GmmData) -> float:
    return float(cloud_log_prior_ordered(_as_cloud(state), data)[0])


def log_posterior_unnorm(state: MixtureState, data: GmmData, k: Optional[int] = None) -> float:
    """Ordered-target log-density: prior + likelihood + log k!, -inf unordered."""
    if k is not None and k != state.k:
        raise ValueError("state size does not match k")
    return float(cloud_log_posterior(_as_cloud(state), data)[0])


def sample_prior_cloud(rng: np.random.Generator, P: int, k: int, data: GmmData) -> MixtureCloud:
    """P draws from the ordered prior (iid components, means sorted)."""
    means = np.sort(rng.normal(data.m, data.S, size=(P, k)), axis=1)
    precisions = rng.gamma(TAU_SHAPE, 1.0 / tau_rate(data.S), size=(P, k))
    weights = rng.dirichlet(np.ones(k), size=P)
    return MixtureCloud(weights=weights, means=means, precisions=precisions)

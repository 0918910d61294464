"""Incremental weights for birth and split hops, conditional and marginal.

The hop k -> k+1 is an importance correction between the pushed-forward
source density and the destination target, both evaluated at the transformed
state theta'.  For the conditional route the discrete label (insertion slot
for birth, child pair for split) is frozen on the particle and a uniform dummy
distribution over labels joins the destination target; the marginal route
instead sums the pushed-forward density over every label whose inverse is
defined (Rao-Blackwellisation), which can only reduce the weight variance.

Auxiliary proposals:

    birth: mu* ~ prior, tau* ~ prior, w* ~ Beta(1, k)
    split: component ~ Uniform{1..k}, u1 ~ Beta(2,2), u2 ~ Beta(2,2), u3 ~ U(0,1)

Beta(1, k) is the marginal of one Dirichlet(1,...,1_{k+1}) coordinate, so the
birth proposal stays aligned with the prior on weights.

These push/target densities are what the engine bridges between; the
functions returning per-particle vectors take a :class:`MixtureCloud` carrying
the frozen labels when the mode is conditional.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln, gammaln

from tsmc.gmm.model import (
    GmmData,
    MixtureCloud,
    MixtureState,
    TAU_SHAPE,
    cloud_log_posterior,
    tau_rate,
)
from tsmc.gmm.transforms import (
    SplitAux,
    birth_log_jacobian,
    merge_components_cloud,
    remove_component_cloud,
    split_log_jacobian,
)

__all__ = [
    "birth_push_log_density",
    "birth_target_log_density",
    "birth_weight",
    "log_birth_aux_density",
    "log_split_aux_density",
    "sample_birth_aux",
    "sample_split_aux",
    "split_push_log_density",
    "split_target_log_density",
    "split_weight",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _logsumexp_columns(stacked: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp over axis 0 where whole columns may be -inf."""
    m = np.max(stacked, axis=0)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.where(
            np.isfinite(m), shift + np.log(np.exp(stacked - shift).sum(axis=0)), -np.inf
        )


# ---------------------------------------------------------------------------
# auxiliary-variable proposals


def log_birth_aux_density(w_star, mu_star, tau_star, k: int, data: GmmData):
    """log psi^(b)(u | theta): prior on (mu*, tau*), Beta(1, k) on w*."""
    w_star = np.asarray(w_star, dtype=float)
    mu_star = np.asarray(mu_star, dtype=float)
    tau_star = np.asarray(tau_star, dtype=float)
    rate = tau_rate(data.S)
    mu_term = -0.5 * _LOG_2PI - math.log(data.S) - 0.5 * ((mu_star - data.m) / data.S) ** 2
    tau_term = (
        TAU_SHAPE * math.log(rate)
        - gammaln(TAU_SHAPE)
        + (TAU_SHAPE - 1.0) * np.log(tau_star)
        - rate * tau_star
    )
    w_term = math.log(k) + (k - 1) * np.log1p(-w_star)
    return mu_term + tau_term + w_term


def sample_birth_aux(rng: np.random.Generator, k: int, data: GmmData):
    """One (w*, mu*, tau*) draw from psi^(b)."""
    return (
        float(rng.beta(1.0, k)),
        float(rng.normal(data.m, data.S)),
        float(rng.gamma(TAU_SHAPE, 1.0 / tau_rate(data.S))),
    )


def _log_beta_pdf(x, a, b):
    return (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) - betaln(a, b)


def log_split_aux_density(u1, u2, u3):
    """log psi^(s)(u): Beta(2,2) x Beta(2,2) x U(0,1)."""
    return _log_beta_pdf(np.asarray(u1, float), 2.0, 2.0) + _log_beta_pdf(
        np.asarray(u2, float), 2.0, 2.0
    )


def sample_split_aux(rng: np.random.Generator, k: int) -> SplitAux:
    """One split auxiliary draw with a uniform route over components."""
    return SplitAux(
        u1=float(rng.beta(2.0, 2.0)),
        u2=float(rng.beta(2.0, 2.0)),
        u3=float(rng.random()),
        component=int(rng.integers(k)),
    )


# ---------------------------------------------------------------------------
# birth: pushed-forward and target densities on the (k+1)-space


def _birth_push_one_label(cloud: MixtureCloud, labels: np.ndarray, data: GmmData):
    """log pi_k(theta^(-l)) + log psi(u^(l)) + log |J_{new->old}| for given slots."""
    k1 = cloud.k
    k = k1 - 1
    w, mu, tau, (w_star, mu_star, tau_star) = remove_component_cloud(
        cloud.weights, cloud.means, cloud.precisions, labels
    )
    reduced = MixtureCloud(weights=w, means=mu, precisions=tau)
    base = cloud_log_posterior(reduced, data)
    psi = log_birth_aux_density(w_star, mu_star, tau_star, k, data)
    # inverse-map Jacobian is 1/(1-w*)^(k-1)
    return base + psi - birth_log_jacobian(k, w_star)


def birth_push_log_density(cloud: MixtureCloud, data: GmmData, mode: str) -> np.ndarray:
    """Pushed-forward source density of a birth hop at the current states."""
    if mode == "conditional":
        if cloud.labels is None:
            raise ValueError("conditional mode needs frozen labels")
        return _birth_push_one_label(cloud, cloud.labels, data)
    if mode != "marginal":
        raise ValueError("mode must be conditional|marginal")
    terms = [
        _birth_push_one_label(cloud, np.full(len(cloud), l, dtype=np.intp), data)
        for l in range(cloud.k)
    ]
    return _logsumexp_columns(np.stack(terms, axis=0))


def birth_target_log_density(cloud: MixtureCloud, data: GmmData, mode: str) -> np.ndarray:
    """Destination target; conditional mode carries the uniform dummy label."""
    out = cloud_log_posterior(cloud, data)
    if mode == "conditional":
        out = out - math.log(cloud.k)  # k = k_old + 1 labels
    return out


def birth_weight(
    state_k: MixtureState,
    u,
    state_k1: MixtureState,
    mode: str,
    data: GmmData,
    label: int | None = None,
) -> float:
    """Incremental log-weight of one birth hop.

    ``label`` is the slot returned by :func:`birth_transform`; required in
    conditional mode (it is the frozen route).
    """
    cloud = MixtureCloud(
        weights=state_k1.weights[None, :],
        means=state_k1.means[None, :],
        precisions=state_k1.precisions[None, :],
        labels=None if label is None else np.array([label], dtype=np.intp),
    )
    to = birth_target_log_density(cloud, data, mode)[0]
    frm = birth_push_log_density(cloud, data, mode)[0]
    return float(to - frm)


# ---------------------------------------------------------------------------
# split: pushed-forward and target densities


def _split_push_one_pair(cloud: MixtureCloud, pairs: np.ndarray, data: GmmData):
    """One merge branch: log pi_k + log rho + log psi - log |J_forward|."""
    k1 = cloud.k
    k = k1 - 1
    w, mu, tau, (u1, u2, u3), merged_pos, valid = merge_components_cloud(
        cloud.weights, cloud.means, cloud.precisions, pairs
    )
    reduced = MixtureCloud(weights=w, means=mu, precisions=tau)
    base = cloud_log_posterior(reduced, data)
    psi = log_split_aux_density(u1, u2, u3)
    take = lambda a, c: np.take_along_axis(a, c[:, None], axis=1)[:, 0]
    w_l = take(reduced.weights, merged_pos)
    tau_l = take(reduced.precisions, merged_pos)
    # rows failing the merge-inverse support test are discarded below; their
    # Jacobians may hit log of a non-positive number
    with np.errstate(invalid="ignore", divide="ignore"):
        jac = split_log_jacobian(
            w_l,
            tau_l,
            take(cloud.means, pairs[:, 0]),
            take(cloud.means, pairs[:, 1]),
            take(cloud.precisions, pairs[:, 0]),
            take(cloud.precisions, pairs[:, 1]),
            u2,
            u3,
        )
        out = base + psi - math.log(k) - jac
    return np.where(valid & np.isfinite(jac), out, -np.inf)


def split_push_log_density(cloud: MixtureCloud, data: GmmData, mode: str) -> np.ndarray:
    """Pushed-forward source density of a split hop at the current states."""
    if mode == "conditional":
        if cloud.labels is None:
            raise ValueError("conditional mode needs frozen child pairs")
        return _split_push_one_pair(cloud, cloud.labels, data)
    if mode != "marginal":
        raise ValueError("mode must be conditional|marginal")
    k1 = cloud.k
    terms = []
    for lo in range(k1):
        for hi in range(lo + 1, k1):
            pairs = np.tile(np.array([[lo, hi]], dtype=np.intp), (len(cloud), 1))
            terms.append(_split_push_one_pair(cloud, pairs, data))
    return _logsumexp_columns(np.stack(terms, axis=0))


def split_target_log_density(cloud: MixtureCloud, data: GmmData, mode: str) -> np.ndarray:
    out = cloud_log_posterior(cloud, data)
    if mode == "conditional":
        k1 = cloud.k
        out = out - math.log(k1 * (k1 - 1) // 2)  # C(k+1, 2) pair labels
    return out


def split_weight(
    state_k: MixtureState,
    aux: SplitAux,
    state_k1: MixtureState,
    mode: str,
    data: GmmData,
    pair: tuple[int, int] | None = None,
) -> float:
    """Incremental log-weight of one split hop.

    ``pair`` is the child-position pair returned by :func:`split_transform`;
    required in conditional mode.
    """
    cloud = MixtureCloud(
        weights=state_k1.weights[None, :],
        means=state_k1.means[None, :],
        precisions=state_k1.precisions[None, :],
        labels=None if pair is None else np.array([pair], dtype=np.intp),
    )
    to = split_target_log_density(cloud, data, mode)[0]
    frm = split_push_log_density(cloud, data, mode)[0]
    return float(to - frm)

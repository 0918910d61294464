"""Birth and moment-matched split transformations and their inverses.

Both maps send a k-component state plus auxiliaries to a (k+1)-component
state, re-establish the ascending-means order, and report where the new
material landed:

* birth: scale existing weights by (1 - w*), insert a fresh component
  (w*, mu*, tau*) at its ordered slot.  Forward Jacobian (1-w*)^(k-1).
* split: Richardson-Green division of component l driven by (u1, u2, u3),
  preserving the component's first two moments (with variance = 1/precision).

Ties between means are broken by stable insertion order (the new component
goes after an equal mean); a probability-zero event kept deterministic.

All label conventions are 0-based positions in the reordered state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tsmc.gmm.model import MixtureCloud, MixtureState

__all__ = [
    "SplitAux",
    "birth_log_jacobian",
    "birth_transform",
    "birth_transform_cloud",
    "merge_components",
    "merge_components_cloud",
    "remove_component",
    "remove_component_cloud",
    "split_log_jacobian",
    "split_transform",
    "split_transform_cloud",
]


@dataclass(frozen=True)
class SplitAux:
    """Auxiliaries of one split move: (u1, u2, u3) in (0,1)^3 and the component."""

    u1: float
    u2: float
    u3: float
    component: int

    def validate(self) -> None:
        for u in (self.u1, self.u2, self.u3):
            if not 0.0 < u < 1.0:
                raise ValueError("split auxiliaries must lie in the open unit interval")


# ---------------------------------------------------------------------------
# insertion / deletion plumbing (batched)


def _insert_sorted(means, new_means, *parallel):
    """Insert column(s) keeping means ascending; stable on ties.

    ``new_means`` has shape (P, r).  Returns the reordered means, the
    positions (P, r) of each inserted column, and every array in ``parallel``
    reordered the same way.
    """
    P, k = means.shape
    r = new_means.shape[1]
    cat = np.concatenate([means, new_means], axis=1)
    order = np.argsort(cat, axis=1, kind="stable")
    out_means = np.take_along_axis(cat, order, axis=1)
    # position of appended column k+j in the sorted row
    pos = np.empty((P, r), dtype=np.intp)
    for j in range(r):
        pos[:, j] = np.argmax(order == k + j, axis=1)
    out_parallel = tuple(np.take_along_axis(a, order, axis=1) for a in parallel)
    return out_means, pos, out_parallel


def _delete_columns(arr, cols):
    """Drop one column per row (cols shape (P,)) from a (P, k) array."""
    P, k = arr.shape
    keep = np.arange(k)[None, :] != cols[:, None]
    return arr[keep].reshape(P, k - 1)


# ---------------------------------------------------------------------------
# birth


def birth_transform_cloud(weights, means, precisions, w_star, mu_star, tau_star):
    """Batched birth; returns (weights', means', precisions', labels)."""
    scaled = weights * (1.0 - w_star)[:, None]
    cat_w = np.concatenate([scaled, w_star[:, None]], axis=1)
    cat_tau = np.concatenate([precisions, tau_star[:, None]], axis=1)
    out_means, pos, (out_w, out_tau) = _insert_sorted(
        means, mu_star[:, None], cat_w, cat_tau
    )
    return out_w, out_means, out_tau, pos[:, 0]


def remove_component_cloud(weights, means, precisions, labels):
    """Batched inverse of birth: delete component ``labels`` and rescale.

    Returns (weights, means, precisions, (w*, mu*, tau*)).
    """
    take = lambda a: np.take_along_axis(a, labels[:, None], axis=1)[:, 0]
    w_star = take(weights)
    mu_star = take(means)
    tau_star = take(precisions)
    rest_w = _delete_columns(weights, labels) / (1.0 - w_star)[:, None]
    rest_mu = _delete_columns(means, labels)
    rest_tau = _delete_columns(precisions, labels)
    return rest_w, rest_mu, rest_tau, (w_star, mu_star, tau_star)


def birth_log_jacobian(k: int, w_star) -> np.ndarray:
    """log |d state_{k+1} / d (state_k, u)| = (k-1) log(1-w*)."""
    return (k - 1) * np.log1p(-np.asarray(w_star, dtype=float))


def birth_transform(state: MixtureState, u) -> tuple[MixtureState, int]:
    """Insert a fresh component (w*, mu*, tau*); returns (state', slot)."""
    w_star, mu_star, tau_star = (float(v) for v in u)
    if not 0.0 < w_star < 1.0:
        raise ValueError("w* must lie in (0, 1)")
    if tau_star <= 0.0:
        raise ValueError("tau* must be positive")
    w, m, t, pos = birth_transform_cloud(
        state.weights[None, :],
        state.means[None, :],
        state.precisions[None, :],
        np.array([w_star]),
        np.array([mu_star]),
        np.array([tau_star]),
    )
    return MixtureState(weights=w[0], means=m[0], precisions=t[0]), int(pos[0])


def remove_component(state: MixtureState, label: int) -> tuple[MixtureState, tuple]:
    """Inverse of birth: returns (state_k, (w*, mu*, tau*))."""
    if not 0 <= label < state.k:
        raise ValueError("label out of range")
    if state.k < 2:
        raise ValueError("cannot remove the only component")
    w, m, t, (ws, mus, taus) = remove_component_cloud(
        state.weights[None, :],
        state.means[None, :],
        state.precisions[None, :],
        np.array([label], dtype=np.intp),
    )
    return (
        MixtureState(weights=w[0], means=m[0], precisions=t[0]),
        (float(ws[0]), float(mus[0]), float(taus[0])),
    )


# ---------------------------------------------------------------------------
# split / merge


def split_transform_cloud(weights, means, precisions, component, u1, u2, u3):
    """Batched moment-matched split; returns (w', mu', tau', pairs (P,2))."""
    take = lambda a: np.take_along_axis(a, component[:, None], axis=1)[:, 0]
    w_l = take(weights)
    mu_l = take(means)
    tau_l = take(precisions)
    sigma_l = 1.0 / np.sqrt(tau_l)

    w_minus = w_l * u1
    w_plus = w_l * (1.0 - u1)
    shift = u2 * sigma_l
    mu_minus = mu_l - shift * np.sqrt(w_plus / w_minus)
    mu_plus = mu_l + shift * np.sqrt(w_minus / w_plus)
    one_minus_u2sq = (1.0 - u2) * (1.0 + u2)
    tau_minus = tau_l * u1 / (u3 * one_minus_u2sq)
    tau_plus = tau_l * (1.0 - u1) / ((1.0 - u3) * one_minus_u2sq)

    rest_w = _delete_columns(weights, component)
    rest_mu = _delete_columns(means, component)
    rest_tau = _delete_columns(precisions, component)
    cat_w = np.concatenate([rest_w, w_minus[:, None], w_plus[:, None]], axis=1)
    cat_tau = np.concatenate([rest_tau, tau_minus[:, None], tau_plus[:, None]], axis=1)
    new_means = np.stack([mu_minus, mu_plus], axis=1)
    out_means, pos, (out_w, out_tau) = _insert_sorted(rest_mu, new_means, cat_w, cat_tau)
    return out_w, out_means, out_tau, pos


def merge_components_cloud(weights, means, precisions, pairs):
    """Batched inverse of split for child positions ``pairs`` (P, 2).

    Returns (w, mu, tau, (u1, u2, u3), merged_position, valid_mask).  Rows
    where the moment-matched inverse degenerates numerically are flagged
    invalid (their outputs are unusable).
    """
    lo = pairs[:, 0]
    hi = pairs[:, 1]
    take = lambda a, c: np.take_along_axis(a, c[:, None], axis=1)[:, 0]
    w_h, w_j = take(weights, lo), take(weights, hi)
    mu_h, mu_j = take(means, lo), take(means, hi)
    tau_h, tau_j = take(precisions, lo), take(precisions, hi)

    w_l = w_h + w_j
    mu_l = (w_h * mu_h + w_j * mu_j) / w_l
    second = (w_h * (mu_h**2 + 1.0 / tau_h) + w_j * (mu_j**2 + 1.0 / tau_j)) / w_l
    var_l = second - mu_l**2
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma_l = np.sqrt(var_l)
        u1 = w_h / w_l
        u2 = (mu_l - mu_h) * np.sqrt(w_h / w_j) / sigma_l
        one_minus_u2sq = (1.0 - u2) * (1.0 + u2)
        u3 = (u1 / tau_h) / (var_l * one_minus_u2sq)
        tau_merged = 1.0 / var_l

    valid = (
        np.isfinite(u1) & np.isfinite(u2) & np.isfinite(u3) & np.isfinite(tau_merged)
        & (u1 > 0) & (u1 < 1) & (u2 > 0) & (u2 < 1) & (u3 > 0) & (u3 < 1)
        & (var_l > 0)
    )
    safe_u2 = np.where(valid, u2, 0.5)
    safe_u3 = np.where(valid, u3, 0.5)
    safe_tau = np.where(valid, tau_merged, 1.0)
    safe_mu = np.where(valid, mu_l, 0.0)

    # drop the higher column first so the lower index stays valid
    rest_w = _delete_columns(_delete_columns(weights, hi), lo)
    rest_mu = _delete_columns(_delete_columns(means, hi), lo)
    rest_tau = _delete_columns(_delete_columns(precisions, hi), lo)
    cat_w = np.concatenate([rest_w, w_l[:, None]], axis=1)
    cat_tau = np.concatenate([rest_tau, safe_tau[:, None]], axis=1)
    out_means, pos, (out_w, out_tau) = _insert_sorted(
        rest_mu, safe_mu[:, None], cat_w, cat_tau
    )
    return out_w, out_means, out_tau, (u1, safe_u2, safe_u3), pos[:, 0], valid


def split_log_jacobian(w_l, tau_l, mu_minus, mu_plus, tau_minus, tau_plus, u2, u3):
    """log of the forward split Jacobian,

    |J| = w_l (mu_+ - mu_-) tau_- tau_+ / (tau_l u2 (1-u2^2) u3 (1-u3)).
    """
    return (
        np.log(w_l)
        + np.log(mu_plus - mu_minus)
        + np.log(tau_minus)
        + np.log(tau_plus)
        - np.log(tau_l)
        - np.log(u2)
        - np.log1p(-u2 * u2)
        - np.log(u3)
        - np.log1p(-u3)
    )


def split_transform(state: MixtureState, aux: SplitAux) -> tuple[MixtureState, tuple]:
    """Split component ``aux.component``; returns (state', (lo, hi) child slots)."""
    aux.validate()
    if not 0 <= aux.component < state.k:
        raise ValueError("component out of range")
    w, m, t, pos = split_transform_cloud(
        state.weights[None, :],
        state.means[None, :],
        state.precisions[None, :],
        np.array([aux.component], dtype=np.intp),
        np.array([aux.u1]),
        np.array([aux.u2]),
        np.array([aux.u3]),
    )
    return MixtureState(weights=w[0], means=m[0], precisions=t[0]), (
        int(pos[0, 0]),
        int(pos[0, 1]),
    )


def merge_components(state: MixtureState, pair) -> tuple[MixtureState, SplitAux]:
    """Inverse of split: merge the components at positions ``pair``.

    Raises ValueError when the moment-matched inverse is numerically
    degenerate (out-of-support for the auxiliary variables).
    """
    lo, hi = sorted(int(c) for c in pair)
    if lo == hi or not 0 <= lo < hi < state.k:
        raise ValueError("pair must be two distinct component positions")
    if state.k < 2:
        raise ValueError("nothing to merge")
    w, m, t, (u1, u2, u3), pos, valid = merge_components_cloud(
        state.weights[None, :],
        state.means[None, :],
        state.precisions[None, :],
        np.array([[lo, hi]], dtype=np.intp),
    )
    if not valid[0]:
        raise ValueError("merge inverse out of support")
    merged = MixtureState(weights=w[0], means=m[0], precisions=t[0])
    return merged, SplitAux(u1=float(u1[0]), u2=float(u2[0]), u3=float(u3[0]), component=int(pos[0]))

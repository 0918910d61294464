"""Birth/remove and split/merge transformations and their Jacobians."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsmc.gmm import (
    SplitAux,
    birth_log_jacobian,
    birth_transform,
    merge_components,
    remove_component,
    split_log_jacobian,
    split_transform,
)
from tsmc.gmm.model import MixtureState


def state(weights, means, precisions):
    return MixtureState(
        weights=np.asarray(weights, float),
        means=np.asarray(means, float),
        precisions=np.asarray(precisions, float),
    )


def random_state(rng, k):
    w = rng.dirichlet(np.ones(k))
    means = np.sort(rng.normal(0.0, 3.0, k))
    means += np.arange(k) * 1e-3  # keep strictly ascending
    taus = rng.gamma(2.0, 1.0, k)
    return state(w, means, taus)


class TestBirth:
    def test_append_case(self):
        s = state([1.0], [0.0], [1.0])
        s2, slot = birth_transform(s, (0.25, 1.0, 2.0))
        assert slot == 1
        np.testing.assert_allclose(s2.weights, [0.75, 0.25])
        np.testing.assert_allclose(s2.means, [0.0, 1.0])

    def test_insert_keeps_means_sorted(self):
        s = state([0.4, 0.6], [-1.0, 3.0], [1.0, 2.0])
        s2, slot = birth_transform(s, (0.1, 0.5, 4.0))
        assert slot == 1
        assert list(s2.means) == [-1.0, 0.5, 3.0]
        np.testing.assert_allclose(s2.weights, [0.36, 0.1, 0.54])

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for k in (1, 2, 4):
            s = random_state(rng, k)
            u = (float(rng.beta(1, k)), float(rng.normal()), float(rng.gamma(2.0)))
            s2, slot = birth_transform(s, u)
            back, u_back = remove_component(s2, slot)
            np.testing.assert_allclose(back.weights, s.weights, atol=1e-12)
            np.testing.assert_allclose(back.means, s.means, atol=1e-12)
            np.testing.assert_allclose(back.precisions, s.precisions, atol=1e-12)
            np.testing.assert_allclose(u_back, u, atol=1e-12)

    def test_weight_jacobian_matches_finite_differences(self):
        # free coordinates: (w_1..w_{k-1}, w*) -> surviving old weights scaled by 1-w*
        rng = np.random.default_rng(1)
        k = 3
        s = random_state(rng, k)
        w_star = 0.2

        def f(v):
            w = np.concatenate([v[:-1], [1.0 - v[:-1].sum()]])
            st_in = state(w, s.means, s.precisions)
            out, slot = birth_transform(st_in, (v[-1], 5.0, 1.0))
            keep = np.delete(out.weights, slot)
            return keep[:-1]  # free coordinates of the k survivors come first

        v0 = np.concatenate([s.weights[:-1], [w_star]])
        eps = 1e-7
        jac = np.zeros((k - 1, k))
        for j in range(k):
            dv = np.zeros(k)
            dv[j] = eps
            jac[:, j] = (f(v0 + dv) - f(v0 - dv)) / (2 * eps)
        # free-weight block is diagonal (1-w*) I; last column completes the square matrix
        full = np.zeros((k, k))
        full[: k - 1, :] = jac
        full[k - 1, k - 1] = 1.0  # d w*/d w*
        fd_logdet = math.log(abs(np.linalg.det(full)))
        assert birth_log_jacobian(k, w_star) == pytest.approx(fd_logdet, rel=1e-5)

    def test_bad_auxiliaries_rejected(self):
        s = state([1.0], [0.0], [1.0])
        with pytest.raises(ValueError):
            birth_transform(s, (1.5, 0.0, 1.0))
        with pytest.raises(ValueError):
            birth_transform(s, (0.5, 0.0, -1.0))

    @given(st.integers(0, 10_000))
    @settings(max_examples=50)
    def test_round_trip_property(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 5))
        s = random_state(rng, k)
        u = (float(rng.uniform(0.01, 0.99)), float(rng.normal()), float(rng.gamma(2.0)))
        s2, slot = birth_transform(s, u)
        assert np.all(np.diff(s2.means) > 0)
        assert s2.weights.sum() == pytest.approx(1.0, abs=1e-12)
        back, _ = remove_component(s2, slot)
        np.testing.assert_allclose(back.means, s.means, atol=1e-12)


class TestSplit:
    def test_moment_preservation(self):
        s = state([0.35, 0.65], [-1.0, 2.0], [0.8, 3.0])
        aux = SplitAux(u1=0.3, u2=0.6, u3=0.4, component=1)
        s2, (lo, hi) = split_transform(s, aux)
        w_l, mu_l, tau_l = 0.65, 2.0, 3.0
        wm, wp = s2.weights[lo], s2.weights[hi]
        mm, mp = s2.means[lo], s2.means[hi]
        tm, tp = s2.precisions[lo], s2.precisions[hi]
        assert wm + wp == pytest.approx(w_l, abs=1e-12)
        assert wm * mm + wp * mp == pytest.approx(w_l * mu_l, abs=1e-12)
        second = wm * (mm**2 + 1.0 / tm) + wp * (mp**2 + 1.0 / tp)
        assert second == pytest.approx(w_l * (mu_l**2 + 1.0 / tau_l), abs=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            k = int(rng.integers(1, 4))
            s = random_state(rng, k)
            aux = SplitAux(
                u1=float(rng.uniform(0.05, 0.95)),
                u2=float(rng.uniform(0.05, 0.95)),
                u3=float(rng.uniform(0.05, 0.95)),
                component=int(rng.integers(k)),
            )
            s2, pair = split_transform(s, aux)
            back, aux_back = merge_components(s2, pair)
            np.testing.assert_allclose(back.weights, s.weights, atol=1e-12)
            np.testing.assert_allclose(back.means, s.means, atol=1e-12)
            np.testing.assert_allclose(back.precisions, s.precisions, atol=1e-12)
            assert aux_back.u1 == pytest.approx(aux.u1, abs=1e-12)
            assert aux_back.u2 == pytest.approx(aux.u2, abs=1e-12)
            assert aux_back.u3 == pytest.approx(aux.u3, abs=1e-12)
            assert aux_back.component == aux.component

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        s = state([1.0], [0.5], [2.0])
        aux = SplitAux(u1=0.4, u2=0.55, u3=0.35, component=0)

        def f(v):
            st_in = state([1.0], [v[0]], [v[1]])
            a = SplitAux(u1=v[2], u2=v[3], u3=v[4], component=0)
            out, (lo, hi) = split_transform(st_in, a)
            return np.array(
                [
                    out.weights[lo],
                    out.means[lo],
                    out.precisions[lo],
                    out.means[hi],
                    out.precisions[hi],
                ]
            )

        # w_l = 1 is pinned for k=1, so the free map is 5 -> 5
        v0 = np.array([0.5, 2.0, aux.u1, aux.u2, aux.u3])
        eps = 1e-6
        jac = np.zeros((5, 5))
        for j in range(5):
            dv = np.zeros(5)
            dv[j] = eps
            jac[:, j] = (f(v0 + dv) - f(v0 - dv)) / (2 * eps)
        fd_logdet = math.log(abs(np.linalg.det(jac)))

        s2, (lo, hi) = split_transform(s, aux)
        analytic = split_log_jacobian(
            1.0,
            2.0,
            s2.means[lo],
            s2.means[hi],
            s2.precisions[lo],
            s2.precisions[hi],
            aux.u2,
            aux.u3,
        )
        # analytic covers the full 6x6 map; the pinned-weight row contributes
        # |d(w-, w+)/d(u1)| = w_l restricted to the simplex, here log(1) = 0
        assert float(analytic) == pytest.approx(fd_logdet, rel=1e-5)

    def test_degenerate_merge_raises(self):
        # components so separated and so precise that 1 - u2^2 underflows
        s = state([0.5, 0.5], [-1e8, 1e8], [1e300, 1e300])
        with pytest.raises(ValueError):
            merge_components(s, (0, 1))

    @given(st.integers(0, 10_000))
    @settings(max_examples=50)
    def test_split_reorders_and_preserves_simplex(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 4))
        s = random_state(rng, k)
        aux = SplitAux(
            u1=float(rng.uniform(0.05, 0.95)),
            u2=float(rng.uniform(0.05, 0.95)),
            u3=float(rng.uniform(0.05, 0.95)),
            component=int(rng.integers(k)),
        )
        s2, pair = split_transform(s, aux)
        assert s2.k == k + 1
        assert np.all(np.diff(s2.means) > 0)
        assert s2.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert pair[0] < pair[1]

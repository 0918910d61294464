"""Engine-level behaviour: weights, resampling, gamma placement, bridges."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from tsmc.engine import (
    BridgeSpec,
    DegenerateCloudError,
    ParticleCloud,
    SmcConfig,
    bridge_deltas,
    bridge_step,
    cess,
    ess,
    find_next_gamma,
    init_cloud,
    log_sum_exp,
    normalize_and_accumulate,
    run_transformation_sequence,
    stratified_resample,
    tempered_log_density,
)

finite_floats = st.floats(min_value=-50, max_value=50, allow_nan=False)


def make_cloud(log_weights, states=None, seed=0):
    lw = np.asarray(log_weights, dtype=float)
    cfg = SmcConfig(particle_count=lw.size, seed=seed)
    cloud = init_cloud(np.zeros(lw.size) if states is None else np.asarray(states, float), cfg)
    cloud.log_weights = lw.copy()
    return cloud


def gaussian_bridge(var_from=1.0, var_to=2.0):
    return BridgeSpec(
        log_target_from=lambda x: -0.5 * np.asarray(x) ** 2 / var_from,
        log_target_to=lambda x: -0.5 * np.asarray(x) ** 2 / var_to,
    )


class TestLogSumExp:
    def test_matches_naive_on_small_values(self):
        v = [0.1, -0.5, 1.7]
        assert log_sum_exp(v) == pytest.approx(math.log(sum(math.exp(x) for x in v)), abs=1e-14)

    def test_handles_large_magnitudes(self):
        assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2.0))

    def test_ignores_minus_inf_entries(self):
        assert log_sum_exp([0.0, -np.inf]) == pytest.approx(0.0)

    @given(st.lists(finite_floats, min_size=1, max_size=20), finite_floats)
    def test_shift_invariance(self, values, shift):
        shifted = log_sum_exp([v + shift for v in values])
        assert shifted == pytest.approx(log_sum_exp(values) + shift, abs=1e-9)


class TestEss:
    def test_equal_weights_give_particle_count(self):
        assert ess(np.full(4, -math.log(4))) == pytest.approx(4.0)

    def test_single_atom(self):
        with np.errstate(divide="ignore"):
            lw = np.log(np.array([1.0, 0.0, 0.0, 0.0]))
        assert ess(lw) == pytest.approx(1.0)

    def test_hand_value(self):
        # normalised weights (0.5, 0.25, 0.25): 1 / sum w^2 = 1/0.375
        assert ess(np.log([0.5, 0.25, 0.25])) == pytest.approx(1.0 / 0.375)

    def test_all_dead_is_degenerate(self):
        with pytest.raises(DegenerateCloudError):
            ess(np.full(3, -np.inf))

    @given(st.lists(finite_floats, min_size=1, max_size=12), finite_floats)
    def test_shift_invariance_and_range(self, lw, shift):
        base = ess(np.array(lw))
        assert ess(np.array(lw) + shift) == pytest.approx(base, rel=1e-9)
        assert 1.0 - 1e-9 <= base <= len(lw) + 1e-9


class TestCess:
    def test_constant_increment_gives_particle_count(self):
        w = np.array([0.3, 0.2, 0.5])
        assert cess(w, np.full(3, 1.234)) == pytest.approx(3.0)

    def test_hand_value(self):
        # P=2, w=(.5,.5), increments (1,3): 2 * 2^2 / 5
        got = cess(np.array([0.5, 0.5]), np.log(np.array([1.0, 3.0])))
        assert got == pytest.approx(1.6)

    def test_zero_weight_particle_is_ignored(self):
        got = cess(np.array([1.0, 0.0]), np.log(np.array([5.0, 7.0])))
        assert got == pytest.approx(2.0)

    def test_all_zero_increments_error(self):
        with pytest.raises(DegenerateCloudError):
            cess(np.array([0.5, 0.5]), np.full(2, -np.inf))


class TestNormalizeAndAccumulate:
    def test_constant_factor(self):
        cloud = make_cloud(np.full(4, -math.log(4)))
        normalize_and_accumulate(cloud, np.full(4, math.log(3.0)))
        assert cloud.log_evidence == pytest.approx(math.log(3.0))
        assert np.exp(cloud.log_weights).sum() == pytest.approx(1.0, abs=1e-12)

    def test_hand_value(self):
        cloud = make_cloud(np.full(2, -math.log(2)))
        normalize_and_accumulate(cloud, np.log(np.array([2.0, 4.0])))
        assert cloud.log_evidence == pytest.approx(math.log(3.0))

    def test_all_dead_errors(self):
        cloud = make_cloud(np.full(2, -math.log(2)))
        with pytest.raises(DegenerateCloudError):
            normalize_and_accumulate(cloud, np.full(2, -np.inf))

    def test_accumulates_across_calls(self):
        cloud = make_cloud(np.full(2, -math.log(2)))
        normalize_and_accumulate(cloud, np.full(2, math.log(2.0)))
        normalize_and_accumulate(cloud, np.full(2, math.log(5.0)))
        assert cloud.log_evidence == pytest.approx(math.log(10.0))


class TestStratifiedResample:
    def test_point_mass(self):
        idx = stratified_resample(np.array([1.0, 0.0, 0.0]), np.random.default_rng(0))
        assert list(idx) == [0, 0, 0]

    def test_equal_weights_hit_every_index_once(self):
        idx = stratified_resample(np.full(4, 0.25), np.random.default_rng(1))
        assert sorted(idx) == [0, 1, 2, 3]

    def test_counts_confined_to_stratum_bounds(self):
        # w=(0.7, 0.3), P=10: inverse-CDF strata pin count_0 to {7, 8}
        w = np.array([0.7] + [0.3 / 9] * 9)
        for seed in range(200):
            counts = np.bincount(stratified_resample(w, np.random.default_rng(seed)), minlength=10)
            assert counts[0] in (7, 8)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            stratified_resample(np.array([1.2, -0.2]), np.random.default_rng(0))

    @given(st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=2, max_size=8), st.integers(0, 999))
    @settings(max_examples=60)
    def test_counts_within_floor_ceil_band(self, raw, seed):
        w = np.array(raw) / np.sum(raw)
        P = w.size
        counts = np.bincount(stratified_resample(w, np.random.default_rng(seed)), minlength=P)
        assert counts.sum() == P
        assert np.all(counts >= np.floor(P * w) - 1)
        assert np.all(counts <= np.ceil(P * w) + 1)


class TestFindNextGamma:
    def test_identical_targets_jump_to_one(self):
        cloud = make_cloud(np.full(3, -math.log(3)))
        bridge = gaussian_bridge(1.0, 1.0)
        assert find_next_gamma(cloud, bridge, 0.0, 0.9) == 1.0

    def test_terminal_step_allowed(self):
        cloud = make_cloud(np.full(64, -math.log(64)), states=np.linspace(-0.1, 0.1, 64))
        bridge = gaussian_bridge(1.0, 1.001)
        assert find_next_gamma(cloud, bridge, 0.0, 0.5) == 1.0

    def test_matches_scalar_root_solve(self):
        # two particles with density ratios (1, e): CESS(g) has a closed form
        cloud = make_cloud(np.full(2, -math.log(2)), states=np.array([0.0, 1.0]))
        bridge = BridgeSpec(
            log_target_from=lambda x: np.zeros(np.size(x)),
            log_target_to=lambda x: np.asarray(x, dtype=float),
        )
        beta = 0.9

        def cess_at(g):
            inc = np.array([0.0, g * 1.0])
            return cess(np.array([0.5, 0.5]), inc)

        oracle = brentq(lambda g: cess_at(g) - beta * 2, 1e-12, 1.0, xtol=1e-12)
        got = find_next_gamma(cloud, bridge, 0.0, beta)
        assert got == pytest.approx(oracle, abs=1e-6)

    def test_gamma_strictly_increases(self):
        cloud = make_cloud(np.full(128, -math.log(128)), states=np.random.default_rng(5).normal(size=128))
        bridge = gaussian_bridge(1.0, 4.0)
        gamma, seen = 0.0, []
        while gamma < 1.0:
            gamma_next = find_next_gamma(cloud, bridge, gamma, 0.9)
            assert gamma_next > gamma
            seen.append(gamma_next)
            gamma = gamma_next
        assert seen[-1] == 1.0


class TestTemperedLogDensity:
    def test_interpolates_geometrically(self):
        bridge = gaussian_bridge(1.0, 2.0)
        x = np.array([1.5])
        mid = tempered_log_density(bridge, 0.25, x)
        expect = 0.25 * (-0.5 * 1.5**2 / 2.0) + 0.75 * (-0.5 * 1.5**2)
        assert mid[0] == pytest.approx(expect)

    def test_endpoint_ignores_source_density(self):
        bridge = BridgeSpec(
            log_target_from=lambda x: np.full(np.size(x), -np.inf),
            log_target_to=lambda x: np.zeros(np.size(x)),
        )
        assert tempered_log_density(bridge, 1.0, np.array([0.0]))[0] == 0.0


class TestBridgeStep:
    def test_zero_gamma_gap_changes_nothing(self):
        cfg = SmcConfig(particle_count=8, seed=3)
        cloud = init_cloud(np.random.default_rng(3).normal(size=8), cfg)
        bridge = gaussian_bridge()
        before = cloud.log_weights.copy()
        bridge_step(cloud, bridge, 0.0, cfg, resample="never")
        assert cloud.log_evidence == 0.0
        np.testing.assert_allclose(cloud.log_weights, before)

    def test_identity_bridge_full_step_keeps_ess(self):
        cfg = SmcConfig(particle_count=16, seed=4)
        cloud = init_cloud(np.random.default_rng(4).normal(size=16), cfg)
        bridge_step(cloud, gaussian_bridge(1.0, 1.0), 1.0, cfg)
        row = cloud.trace[-1]
        assert row.cess == pytest.approx(16.0)
        assert row.ess == pytest.approx(16.0)
        assert not row.resampled

    def test_nonfinite_target_kills_particle_not_run(self):
        cfg = SmcConfig(particle_count=4, seed=5)
        cloud = init_cloud(np.array([0.0, 1.0, 2.0, 3.0]), cfg)
        bridge = BridgeSpec(
            log_target_from=lambda x: np.zeros(np.size(x)),
            log_target_to=lambda x: np.where(np.asarray(x) > 2.5, -np.inf, 0.0),
        )
        bridge_step(cloud, bridge, 1.0, cfg, resample="never")
        assert cloud.log_weights[3] == -np.inf
        assert np.isfinite(cloud.log_evidence)

    def test_trace_records_schedule(self):
        cfg = SmcConfig(particle_count=32, seed=6, cess_target=0.8)
        cloud = init_cloud(np.random.default_rng(6).normal(size=32), cfg)
        bridge = gaussian_bridge(1.0, 3.0)
        step = 0
        while bridge.gamma < 1.0:
            gamma_next = find_next_gamma(cloud, bridge, bridge.gamma, cfg.cess_target)
            bridge_step(cloud, bridge, gamma_next, cfg, bridge_index=7, step_index=step)
            step += 1
        gammas = [row.gamma for row in cloud.trace]
        assert gammas == sorted(gammas)
        assert gammas[-1] == 1.0
        assert all(row.bridge == 7 for row in cloud.trace)


class TestRunTransformationSequence:
    def test_identity_bridges_give_zero_evidence(self):
        cfg = SmcConfig(particle_count=16, seed=7)
        cloud = init_cloud(np.random.default_rng(7).normal(size=16), cfg)
        bridges = [gaussian_bridge(1.0, 1.0), gaussian_bridge(1.0, 1.0)]
        _, evidences = run_transformation_sequence(cloud, bridges, cfg)
        assert evidences == [0.0, 0.0]
        assert all(row.ess == pytest.approx(16.0) for row in cloud.trace)

    def test_gaussian_variance_bridge_matches_analytic_ratio(self):
        # e^{-x^2/2} -> e^{-x^2/4}: log(Z_to/Z_from) = log sqrt(4pi/2pi)
        cfg = SmcConfig(particle_count=4000, seed=8, cess_target=0.9)
        cloud = init_cloud(np.random.default_rng(8).normal(size=4000), cfg)
        _, (log_z,) = run_transformation_sequence(cloud, [gaussian_bridge(1.0, 2.0)], cfg)
        assert log_z == pytest.approx(0.5 * math.log(2.0), abs=0.05)

    def test_requires_fresh_bridges(self):
        cfg = SmcConfig(particle_count=4, seed=9)
        cloud = init_cloud(np.zeros(4), cfg)
        used = gaussian_bridge()
        used.gamma = 0.5
        with pytest.raises(ValueError):
            run_transformation_sequence(cloud, [used], cfg)

    def test_same_seed_is_bit_identical(self):
        def run():
            cfg = SmcConfig(particle_count=256, seed=11, cess_target=0.9)
            cloud = init_cloud(np.random.default_rng(11).normal(size=256), cfg)
            _, (log_z,) = run_transformation_sequence(cloud, [gaussian_bridge(1.0, 2.5)], cfg)
            return log_z

        assert run() == run()


class TestInitCloud:
    def test_streams_are_per_particle_plus_engine(self):
        cfg = SmcConfig(particle_count=5, seed=12)
        cloud = init_cloud(np.zeros(5), cfg)
        assert len(cloud.rng_streams) == 5
        draws = {stream.integers(1 << 30) for stream in cloud.rng_streams}
        draws.add(cloud.engine_rng.integers(1 << 30))
        assert len(draws) == 6

    def test_weights_start_equal_and_evidence_zero(self):
        cloud = init_cloud(np.zeros(3), SmcConfig(particle_count=3))
        np.testing.assert_allclose(cloud.log_weights, -math.log(3))
        assert cloud.log_evidence == 0.0

    def test_state_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            init_cloud(np.zeros(4), SmcConfig(particle_count=5))


class TestBridgeDeltas:
    def test_plain_difference(self):
        bridge = gaussian_bridge(1.0, 2.0)
        x = np.array([0.0, 2.0])
        np.testing.assert_allclose(bridge_deltas(bridge, x), [0.0, -1.0 + 2.0])

    def test_dead_source_maps_to_minus_inf(self):
        bridge = BridgeSpec(
            log_target_from=lambda x: np.array([-np.inf]),
            log_target_to=lambda x: np.array([0.0]),
        )
        assert bridge_deltas(bridge, np.array([0.0]))[0] == -np.inf

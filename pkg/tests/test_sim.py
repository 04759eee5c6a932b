"""Trajectory determinism, integrator order, jump statistics, and probes."""

import math

import numpy as np
import pytest

from faultroute import (
    NetworkParams,
    ParameterError,
    SimConfig,
    integrate_mode,
    occupancy_batches,
    simulate,
    stability_probe,
    stationary_distribution,
    throughput_scan,
)

HOMOG = NetworkParams(F1=0.5, F2=0.5, beta=1.0, eta=0.5)
ONES = np.ones((4, 4)) - np.eye(4)
FROZEN = np.zeros((4, 4))


class TestConfigValidation:
    def test_step_larger_than_sample_interval_rejected(self):
        with pytest.raises(ParameterError):
            SimConfig(horizon=10.0, step=2.0, sample_interval=1.0)

    def test_nonpositive_horizon_rejected(self):
        with pytest.raises(ParameterError):
            SimConfig(horizon=0.0)

    def test_bad_initial_mode_rejected(self):
        with pytest.raises(ParameterError):
            SimConfig(horizon=1.0, s0=0)

    def test_cap_must_exceed_initial_density(self):
        cfg = SimConfig(horizon=10.0, x0=(600.0, 500.0), divergence_cap=1000.0)
        with pytest.raises(ParameterError):
            simulate(HOMOG, ONES, cfg)


class TestDeterminism:
    def test_identical_seed_identical_trajectory(self):
        cfg = SimConfig(horizon=50.0, step=0.01, seed=7)
        a = simulate(HOMOG, ONES, cfg)
        b = simulate(HOMOG, ONES, cfg)
        assert np.array_equal(a.t, b.t)
        assert np.array_equal(a.x1, b.x1)
        assert np.array_equal(a.x2, b.x2)
        assert np.array_equal(a.mode, b.mode)
        assert np.array_equal(a.jump_times, b.jump_times)

    def test_different_seed_differs(self):
        cfg = SimConfig(horizon=50.0, step=0.01, seed=7)
        other = simulate(HOMOG, ONES, SimConfig(horizon=50.0, step=0.01, seed=8))
        base = simulate(HOMOG, ONES, cfg)
        assert not np.array_equal(base.jump_times, other.jump_times)


class TestDynamics:
    def test_zero_demand_decays_monotonically(self):
        params = NetworkParams(0.5, 0.5, 1.0, 0.0)
        cfg = SimConfig(horizon=30.0, step=0.01, seed=1, x0=(1.0, 1.0))
        traj = simulate(params, ONES, cfg)
        assert np.all(np.diff(traj.x1) < 0.0)
        assert np.all(np.diff(traj.x2) < 0.0)
        assert np.all(np.diff(traj.avg_abs) < 0.0)
        assert traj.x1[-1] < 0.05

    def test_densities_stay_nonnegative(self):
        for seed in (0, 1, 2):
            cfg = SimConfig(horizon=100.0, step=0.01, seed=seed, x0=(0.0, 0.0))
            traj = simulate(NetworkParams(0.9, 0.1, 2.0, 0.4), ONES, cfg)
            assert np.all(traj.x1 >= 0.0)
            assert np.all(traj.x2 >= 0.0)

    def test_sample_times_strictly_increase(self):
        traj = simulate(HOMOG, ONES, SimConfig(horizon=25.0, step=0.01, seed=4))
        assert np.all(np.diff(traj.t) > 0.0)

    def test_default_start_is_the_floor_corner(self):
        traj = simulate(NetworkParams(0.5, 0.5, 1.0, 0.8), ONES, SimConfig(horizon=2.0, seed=0))
        assert traj.x1[0] == pytest.approx(0.732668, abs=1e-5)

    def test_divergence_detected_and_flagged(self):
        params = NetworkParams(0.5, 0.5, 1.0, 1.05)
        cfg = SimConfig(horizon=3000.0, step=0.01, seed=2, divergence_cap=40.0)
        traj = simulate(params, ONES, cfg)
        assert traj.diverged
        assert traj.diverged_at is not None and traj.diverged_at < 3000.0
        assert traj.x1[-1] + traj.x2[-1] > 40.0
        assert traj.elapsed == pytest.approx(traj.diverged_at)


class TestIntegratorOrder:
    def test_fourth_order_convergence(self):
        # frozen mode 2 (zero switching rates), nontrivial asymmetric start
        params = NetworkParams(0.5, 0.5, 1.0, 0.8)

        def end_state(step):
            cfg = SimConfig(horizon=2.0, step=step, seed=0, x0=(2.0, 0.5), s0=2, sample_interval=2.0)
            traj = simulate(params, FROZEN, cfg)
            return traj.x1[-1], traj.x2[-1]

        ref = end_state(0.1 / 16.0)
        coarse = end_state(0.1)
        fine = end_state(0.05)
        err_c = abs(coarse[0] - ref[0]) + abs(coarse[1] - ref[1])
        err_f = abs(fine[0] - ref[0]) + abs(fine[1] - ref[1])
        assert err_f > 1e-14
        assert 12.0 < err_c / err_f < 20.0

    def test_integrate_mode_matches_simulate(self):
        params = NetworkParams(0.5, 0.5, 1.0, 0.8)
        direct = integrate_mode(params, 2, (2.0, 0.5), 2.0, 0.1)
        cfg = SimConfig(horizon=2.0, step=0.1, seed=0, x0=(2.0, 0.5), s0=2, sample_interval=2.0)
        traj = simulate(params, FROZEN, cfg)
        assert direct[0] == pytest.approx(traj.x1[-1], abs=1e-12)
        assert direct[1] == pytest.approx(traj.x2[-1], abs=1e-12)

    def test_frozen_mode_never_jumps(self):
        traj = simulate(HOMOG, FROZEN, SimConfig(horizon=10.0, seed=5, s0=3))
        assert len(traj.jump_times) == 0
        assert np.all(traj.mode == 3)
        assert traj.mode_occupancy[2] == pytest.approx(1.0)


JUMP_RATES = np.array(
    [
        [0.0, 2.0, 1.0, 0.5],
        [1.0, 0.0, 1.0, 1.0],
        [0.5, 0.5, 0.0, 2.0],
        [1.0, 2.0, 1.0, 0.0],
    ]
)


@pytest.fixture(scope="module")
def traj():
    return simulate(HOMOG, JUMP_RATES, SimConfig(horizon=3000.0, step=0.01, seed=11))


class TestJumpStatistics:
    RATES = JUMP_RATES

    def test_holding_times_match_rates(self, traj):
        starts = np.concatenate([[0.0], traj.jump_times])
        modes = np.concatenate([[traj.initial_mode], traj.jump_modes]).astype(int)
        ends = np.concatenate([traj.jump_times, [traj.elapsed]])
        durations = ends - starts
        row_rate = self.RATES.sum(axis=1)
        for m in range(1, 5):
            holds = durations[modes == m][:-1] if modes[-1] == m else durations[modes == m]
            mean = holds.mean()
            expected = 1.0 / row_rate[m - 1]
            se = holds.std(ddof=1) / math.sqrt(len(holds))
            assert abs(mean - expected) < 3.0 * se, (m, mean, expected)

    def test_jump_targets_match_rate_proportions(self, traj):
        modes = np.concatenate([[traj.initial_mode], traj.jump_modes]).astype(int)
        for m in range(1, 5):
            idx = np.where(modes[:-1] == m)[0]
            targets = modes[idx + 1]
            n = len(targets)
            probs = self.RATES[m - 1] / self.RATES[m - 1].sum()
            for tgt in range(1, 5):
                if tgt == m:
                    assert not np.any(targets == tgt)
                    continue
                frac = float(np.mean(targets == tgt))
                se = math.sqrt(probs[tgt - 1] * (1.0 - probs[tgt - 1]) / n)
                assert abs(frac - probs[tgt - 1]) < 4.0 * se, (m, tgt, frac)

    def test_occupancy_matches_stationary_law(self, traj):
        p = stationary_distribution(self.RATES)
        batches = occupancy_batches(traj, 30)
        se = batches.std(axis=0, ddof=1) / math.sqrt(30)
        assert np.all(np.abs(traj.mode_occupancy - p) < 4.0 * se + 1e-3)

    def test_occupancy_sums_to_one(self, traj):
        assert traj.mode_occupancy.sum() == pytest.approx(1.0, abs=1e-9)
        batches = occupancy_batches(traj, 30)
        assert np.allclose(batches.sum(axis=1), 1.0, atol=1e-9)


class TestStabilityProbe:
    def test_stable_demand(self):
        cfg = SimConfig(horizon=1500.0, step=0.01, seed=0)
        probe = stability_probe(HOMOG, ONES, cfg, replications=3)
        assert probe.verdict == "empirically-stable"
        assert probe.n_diverged == 0

    def test_super_capacity_demand(self):
        params = NetworkParams(0.5, 0.5, 1.0, 1.05)
        cfg = SimConfig(horizon=1500.0, step=0.01, seed=0)
        probe = stability_probe(params, ONES, cfg, replications=3)
        assert probe.verdict == "empirically-unstable"
        assert probe.median_growth_slope == pytest.approx(0.05, abs=0.02)

    def test_zero_demand(self):
        params = NetworkParams(0.5, 0.5, 1.0, 0.0)
        cfg = SimConfig(horizon=200.0, step=0.01, seed=3, x0=(1.0, 1.0))
        probe = stability_probe(params, ONES, cfg, replications=2)
        assert probe.verdict == "empirically-stable"

    def test_replication_seeds_follow_xor_rule(self):
        cfg = SimConfig(horizon=20.0, step=0.01, seed=12)
        probe = stability_probe(HOMOG, ONES, cfg, replications=3)
        assert [r["seed"] for r in probe.run_stats] == [12 ^ 0, 12 ^ 1, 12 ^ 2]

    def test_requires_replications(self):
        with pytest.raises(ParameterError):
            stability_probe(HOMOG, ONES, SimConfig(horizon=10.0), replications=0)


class TestThroughputScan:
    def test_empty_grid(self):
        result = throughput_scan(HOMOG, ONES, SimConfig(horizon=10.0), [])
        assert result.etas == [] and result.probes == []
        assert result.largest_stable is None and result.smallest_unstable is None

    def test_transition_window(self):
        cfg = SimConfig(horizon=800.0, step=0.01, seed=1)
        result = throughput_scan(HOMOG, ONES, cfg, [0.5, 1.1], replications=2)
        assert result.largest_stable == 0.5
        assert result.smallest_unstable == 1.1
        assert [p.verdict for p in result.probes] == ["empirically-stable", "empirically-unstable"]

    def test_unsorted_grid_rejected(self):
        with pytest.raises(ParameterError):
            throughput_scan(HOMOG, ONES, SimConfig(horizon=10.0), [0.5, 0.4])

    def test_out_of_range_grid_rejected(self):
        with pytest.raises(ParameterError):
            throughput_scan(HOMOG, ONES, SimConfig(horizon=10.0), [0.5, 1.3])

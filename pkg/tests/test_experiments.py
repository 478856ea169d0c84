"""Tests for direction search, noise scans, outcome association, steering and calibration."""

from dataclasses import replace

import numpy as np
import pytest

from chunk_artifacts.chunking.metrics import Control
from chunk_artifacts.env.contexts import ContextSnapshot
from chunk_artifacts.env.testbed import EnvConfig, initial_state
from chunk_artifacts.errors import CapabilityError, ContractViolation
from chunk_artifacts.experiments import (
    TrajectorySteeringPlan,
    aggregate_reports,
    analyze_traces,
    artifact_gradient,
    calibrate_slip_threshold,
    null_direction,
    run_alpha_sweep,
    run_decomposition,
    run_direction_experiment,
    run_noise_scan,
    run_outcome_association,
    run_trajectory_steering,
    search_direction,
    stitch_jacobian,
)
from chunk_artifacts.experiments.noise_scan import build_reference_contexts
from chunk_artifacts.experiments.parallel import run_baseline_episodes
from chunk_artifacts.models import SteeringReport
from chunk_artifacts.policy.generator import ChunkPolicy, PolicyConfig
from chunk_artifacts.policy.noise import SteeringDirection
from chunk_artifacts.policy.probe import BoundaryProbe
from chunk_artifacts.stats import build_group_report
from tests.conftest import boundary_pulse, build_trace


@pytest.fixture
def context(env_config) -> ContextSnapshot:
    return ContextSnapshot(state=initial_state(env_config, 0, 0), context_id="start", episode_id=0)


@pytest.fixture
def noises(policy):
    return policy.sample_noise(0, 0, 0), policy.sample_noise(0, 0, 1)


@pytest.mark.unit
class TestDirectionSearch:
    def test_direction_is_oriented_and_best(self, policy, env_config, context, noises):
        z0, z1 = noises
        d = search_direction(context, z0, z1, policy, env_config, n_directions=6, epsilon=0.5, seed=3)
        probe = BoundaryProbe(context, z0, policy, env_config, 5)
        plus = probe.evaluate_values(z1.values + 0.5 * d.direction).jerk_contrast
        minus = probe.evaluate_values(z1.values - 0.5 * d.direction).jerk_contrast
        assert plus >= minus
        assert d.selection_score == pytest.approx(max(d.scores))
        assert d.candidate_index == int(np.argmax(d.scores))
        assert d.direction_id == f"start/d{d.candidate_index}"
        assert not d.degenerate

    def test_search_is_seeded(self, policy, env_config, context, noises):
        first = search_direction(context, *noises, policy, env_config, n_directions=4, seed=1)
        second = search_direction(context, *noises, policy, env_config, n_directions=4, seed=1)
        np.testing.assert_array_equal(first.direction, second.direction)

    def test_no_deviation_is_degenerate(self, env_config, context):
        policy = ChunkPolicy(PolicyConfig(epsilon_dev=0.0))
        z0, z1 = policy.sample_noise(0, 0, 0), policy.sample_noise(0, 0, 1)
        d = search_direction(context, z0, z1, policy, env_config, n_directions=3, metric="btj")
        assert d.degenerate
        assert d.selection_score == 0.0

    @pytest.mark.parametrize("kwargs", [{"n_directions": 0}, {"epsilon": 0.0}])
    def test_rejects_bad_arguments(self, policy, env_config, context, noises, kwargs):
        with pytest.raises(ContractViolation):
            search_direction(context, *noises, policy, env_config, **kwargs)


@pytest.mark.unit
class TestSweepAndGradients:
    def test_sweep_grid_must_contain_zero(self, policy, env_config, context, noises):
        d = search_direction(context, *noises, policy, env_config, n_directions=2)
        with pytest.raises(ContractViolation):
            run_alpha_sweep(context, *noises, d, [0.5, 1.0], policy, env_config)

    def test_sweep_is_sorted_and_centered(self, policy, env_config, context, noises):
        z0, z1 = noises
        d = search_direction(context, z0, z1, policy, env_config, n_directions=4)
        sweep = run_alpha_sweep(context, z0, z1, d, [1.0, 0.0, -1.0, 0.5], policy, env_config)
        assert sweep.alpha_grid == [-1.0, 0.0, 0.5, 1.0]
        center = BoundaryProbe(context, z0, policy, env_config, 5).evaluate(z1)
        assert sweep.contrast[1] == pytest.approx(center.jerk_contrast)
        assert sweep.btj[1] == pytest.approx(center.boundary_transition_jerk)
        assert sweep.r_contrast is None or -1.0 <= sweep.r_contrast <= 1.0
        assert sweep.contrast_range == pytest.approx(max(sweep.contrast) - min(sweep.contrast))

    @pytest.mark.parametrize("metric", ["btj", "contrast"])
    def test_gradient_matches_finite_differences(self, policy, env_config, context, noises, metric):
        z0, z1 = noises
        probe = BoundaryProbe(context, z0, policy, env_config, 5)
        gradient = artifact_gradient(probe, z1.values, metric)
        h = 1e-6
        for i in (0, 3, 11, 19):
            step = np.zeros(policy.latent_dim)
            step[i] = h
            plus = probe.evaluate_values(z1.values + step)
            minus = probe.evaluate_values(z1.values - step)
            if metric == "btj":
                numeric = (plus.boundary_transition_jerk - minus.boundary_transition_jerk) / (2 * h)
            else:
                numeric = (plus.jerk_contrast - minus.jerk_contrast) / (2 * h)
            assert gradient[i] == pytest.approx(numeric, rel=1e-4, abs=1e-6)

    def test_jacobian_shape_and_rank(self, policy, env_config, context, noises):
        z0, z1 = noises
        probe = BoundaryProbe(context, z0, policy, env_config, 5)
        jac = stitch_jacobian(probe, z1.values)
        assert jac.shape == (20, 20)
        np.testing.assert_allclose(jac[:10], 0.0)
        assert np.linalg.matrix_rank(jac) <= policy.config.rank

    def test_null_direction_leaves_the_stitch_unchanged(self, policy, env_config, context, noises):
        z0, z1 = noises
        probe = BoundaryProbe(context, z0, policy, env_config, 5)
        d = null_direction(probe, z1.values, np.random.default_rng(0))
        np.testing.assert_allclose(
            probe.stitched_actions(z1.values + 0.8 * d.direction),
            probe.stitched_actions(z1.values),
            atol=1e-10,
        )


@pytest.mark.integration
class TestScans:
    def test_scan_without_deviation_has_no_spread(self, env_config):
        report = run_noise_scan(
            2, 3, env_config, PolicyConfig(epsilon_dev=0.0), pool_episodes=2, n_boot=100
        )
        assert report.vary == "z1"
        assert len(report.contexts) == 2
        for scan in report.contexts:
            assert len(scan.contrasts) == 3
            assert scan.contrast_std == pytest.approx(0.0, abs=1e-12)
            assert scan.btj_std == pytest.approx(0.0, abs=1e-12)
        assert report.mean_contrast_std.hi == pytest.approx(0.0, abs=1e-12)

    def test_scan_is_reproducible(self, env_config, policy_config):
        kwargs = dict(pool_episodes=2, n_boot=100, seed=5)
        first = run_noise_scan(2, 3, env_config, policy_config, **kwargs)
        second = run_noise_scan(2, 3, env_config, policy_config, **kwargs)
        assert first == second
        assert all(scan.contrast_std > 0 for scan in first.contexts)

    def test_decomposition_rows(self, env_config, policy_config):
        result = run_decomposition(2, 4, env_config, policy_config, pool_episodes=2)
        assert [row.condition for row in result.rows] == ["vary_z0", "vary_z1", "vary_both"]
        assert all(row.n_contexts == 2 and row.n_samples == 4 for row in result.rows)

    def test_direction_experiment(self, env_config, policy_config):
        report = run_direction_experiment(
            2, env_config, policy_config, n_directions=3, alpha_grid=(-0.5, 0.0, 0.5), pool_episodes=2
        )
        assert len(report.directions) == len(report.sweeps) == 2
        assert report.decisions["polarity"] == "+alpha increases the artifact"
        assert all(sweep.alpha_grid == [-0.5, 0.0, 0.5] for sweep in report.sweeps)


@pytest.mark.unit
class TestAssociation:
    def _traces(self):
        smooth = [build_trace(0.5 * np.arange(30.0) ** 2, outcome=True, episode_id=i) for i in range(4)]
        jerky = [build_trace(boundary_pulse(30, height=h), episode_id=10 + h) for h in range(1, 5)]
        return smooth + jerky

    def test_failures_carry_larger_contrast(self):
        report = analyze_traces(self._traces(), controls=["all"], n_perm=1_000)
        row = report.rows[0]
        assert row.applicable
        assert (row.n_success, row.n_failure) == (4, 4)
        assert row.delta == pytest.approx(2.5)
        assert row.test.exact
        assert row.test.p_value == pytest.approx(1 / 70)
        assert report.matched_horizon == 30
        assert {p.group for p in report.profiles} == {"success", "failure"}
        assert "few_episodes" in report.flags

    def test_single_outcome_is_inapplicable(self):
        traces = [build_trace(boundary_pulse(20), episode_id=i) for i in range(3)]
        report = analyze_traces(traces, controls=["all"])
        assert "single_outcome" in report.flags
        assert not report.rows[0].applicable
        assert report.rows[0].test is None

    def test_contact_controls_need_masks(self):
        with pytest.raises(CapabilityError):
            analyze_traces(self._traces(), controls=[Control.CONTACT_FREE.value])

    def test_invalid_traces_are_dropped(self):
        traces = self._traces()
        traces[0] = replace(traces[0], valid=False)
        report = analyze_traces(traces, controls=["all"], n_perm=200)
        assert report.n_episodes == 7
        assert "dropped_invalid:1" in report.flags

    @pytest.mark.integration
    def test_testbed_run_returns_traces(self, env_config, policy_config):
        report, traces = run_outcome_association(4, env_config, policy_config, n_perm=200)
        assert len(traces) == 4
        assert [row.control for row in report.rows] == [c.value for c in Control]
        assert report.n_episodes == sum(t.valid for t in traces)


@pytest.mark.unit
class TestSteeringPlan:
    def test_baseline_never_touches_noise(self, policy, env_config, context):
        plan = TrajectorySteeringPlan("baseline", policy, env_config, 5, 0, 0, warmup_boundaries=1)
        for c in range(4):
            z = policy.sample_noise(0, 0, c)
            assert plan.noise_for_chunk(context, c, z) is z
        assert plan.searches == 0

    def test_good_arm_shifts_against_the_direction(self, policy, env_config, context):
        plan = TrajectorySteeringPlan(
            "good", policy, env_config, 5, 0, 0, alpha_magnitude=0.5, warmup_boundaries=1, n_directions=4
        )
        z0, z1, z2 = (policy.sample_noise(0, 0, c) for c in range(3))
        assert plan.noise_for_chunk(context, 0, z0) is z0
        assert plan.noise_for_chunk(context, 1, z1) is z1
        assert plan.searches == 1
        assert plan.direction is not None and not plan.fallback
        steered = plan.noise_for_chunk(context, 2, z2)
        np.testing.assert_allclose(steered.values, z2.values - 0.5 * plan.direction.direction)
        assert plan.searches == 1

    def test_degenerate_search_falls_back(self, env_config, context):
        policy = ChunkPolicy(PolicyConfig(epsilon_dev=0.0))
        plan = TrajectorySteeringPlan("bad", policy, env_config, 5, 0, 0, warmup_boundaries=1, n_directions=2)
        z1, z2 = policy.sample_noise(0, 0, 1), policy.sample_noise(0, 0, 2)
        plan.noise_for_chunk(context, 1, z1)
        assert plan.fallback
        assert plan.noise_for_chunk(context, 2, z2) is z2

    @pytest.mark.parametrize("arm, alpha, warmup", [("sideways", 0.5, 2), ("good", 0.0, 2), ("good", 0.5, 0)])
    def test_rejects_bad_settings(self, policy, env_config, arm, alpha, warmup):
        with pytest.raises(ContractViolation):
            TrajectorySteeringPlan(arm, policy, env_config, 5, 0, 0, alpha_magnitude=alpha, warmup_boundaries=warmup)


@pytest.mark.integration
class TestTrajectorySteering:
    def test_small_run(self, env_config, policy_config):
        report = run_trajectory_steering(
            ["baseline", "good", "bad"], 3, 0.5, 2, env_config, policy_config, n_directions=3, n_boot=100
        )
        assert [g.arm for g in report.groups] == ["baseline", "good", "bad"]
        for group in report.groups:
            assert group.n + group.n_excluded == 3
            assert set(group.episode_ids) <= {0, 1, 2}
        assert report.decisions["warmup_boundaries"] == 2
        assert report.preset == "headroom"

    def test_unknown_arm(self, env_config, policy_config):
        with pytest.raises(ContractViolation):
            run_trajectory_steering(["baseline", "worse"], 1, 0.5, 2, env_config, policy_config)


def _report(arms, ids, regime="headroom") -> SteeringReport:
    groups = [
        build_group_report(arm, ids, [i % 2 == 0 for i in ids], [0.1 * i for i in ids], n_boot=100, regimes=[regime])
        for arm in arms
    ]
    return SteeringReport(preset=regime, groups=groups)


@pytest.mark.unit
class TestAggregate:
    def test_disjoint_ids_pool_directly(self):
        pooled = aggregate_reports([_report(["good", "bad"], [0, 1]), _report(["good", "bad"], [2, 3])], n_boot=100)
        assert pooled.groups[0].episode_ids == [0, 1, 2, 3]
        assert pooled.groups[0].flags == []
        assert pooled.decisions["pooled_runs"] == 2

    def test_colliding_ids_are_rekeyed(self):
        pooled = aggregate_reports([_report(["good"], [0, 1]), _report(["good"], [0, 1])], n_boot=100)
        group = pooled.groups[0]
        assert group.episode_ids == [0, 1, 1_000_000, 1_000_001]
        assert "rekeyed_episode_ids" in group.flags

    def test_mixed_regimes_are_flagged(self):
        pooled = aggregate_reports(
            [_report(["good"], [0], "headroom"), _report(["good"], [1], "floor")], n_boot=100
        )
        assert "mixed_regimes" in pooled.groups[0].flags
        assert pooled.preset == "floor+headroom"

    def test_mismatched_arms(self):
        with pytest.raises(ContractViolation):
            aggregate_reports([_report(["good"], [0]), _report(["bad"], [1])])

    def test_nothing_to_pool(self):
        with pytest.raises(ContractViolation):
            aggregate_reports([])


@pytest.mark.integration
class TestCalibration:
    def test_picks_the_closest_rate(self, policy_config):
        env = EnvConfig.from_preset("headroom")
        result = calibrate_slip_threshold(0.0, [100.0, 0.01], env, policy_config, n_episodes=2)
        assert result.thresholds == [0.01, 100.0]
        assert result.success_rates[0] == 0.0
        assert result.chosen_threshold == 0.01

    @pytest.mark.parametrize("target, grid", [(1.5, [0.4]), (0.5, [])])
    def test_rejects_bad_input(self, policy_config, env_config, target, grid):
        with pytest.raises(ContractViolation):
            calibrate_slip_threshold(target, grid, env_config, policy_config, n_episodes=1)


def _success_rate(traces) -> float:
    return float(np.mean([t.outcome for t in traces]))


def _arms(report: SteeringReport) -> dict:
    return {group.arm: group for group in report.groups}


@pytest.mark.slow
class TestPresetCalibration:
    def test_baseline_success_bands(self, policy_config):
        rates = {
            preset: _success_rate(run_baseline_episodes(policy_config, EnvConfig.from_preset(preset), 5, 0, range(200)))
            for preset in ("headroom", "ceiling", "floor")
        }
        assert 0.6 <= rates["headroom"] <= 0.8
        assert rates["ceiling"] >= 0.98
        assert rates["floor"] < rates["headroom"]

    def test_no_deviation_always_succeeds(self, env_config):
        traces = run_baseline_episodes(PolicyConfig(epsilon_dev=0.0), env_config, 5, 0, range(50))
        assert _success_rate(traces) == 1.0


@pytest.mark.slow
class TestOutcomeAssociationOracles:
    def test_failures_are_jerkier_on_the_testbed(self, env_config, policy_config):
        report, _ = run_outcome_association(200, env_config, policy_config, n_perm=20_000)
        rows = {row.control: row for row in report.rows}
        assert rows["all"].applicable
        assert rows["all"].delta > 0.0
        assert rows["all"].test.p_value < 0.01
        for control in ("contact_free", "contact_free_first_n"):
            assert rows[control].delta > 0.0
            assert rows[control].test.p_value < 0.1

    def test_no_deviation_gives_no_association(self):
        env = EnvConfig.from_preset("headroom", base_drop_rate=0.01)
        policy_config = PolicyConfig(epsilon_dev=0.0)
        p_values = []
        for seed in range(20):
            report, _ = run_outcome_association(
                200, env, policy_config, controls=["all"], seed=seed, n_perm=2_000
            )
            assert report.rows[0].applicable
            p_values.append(report.rows[0].test.p_value)
        assert sum(p > 0.05 for p in p_values) >= 18


def _brute_force_spread(reference, policy, env_config, n_draws: int, rng) -> float:
    probe = BoundaryProbe(reference.context, reference.z0, policy, env_config, 5)
    summaries = (probe.evaluate_values(rng.standard_normal(policy.latent_dim)) for _ in range(n_draws))
    return float(np.std([s.jerk_contrast for s in summaries if s.valid], ddof=1))


@pytest.mark.slow
class TestScanOracles:
    def test_every_context_spread_matches_brute_force(self, env_config, policy_config):
        scan = run_noise_scan(4, 400, env_config, policy_config, n_boot=200)
        references = build_reference_contexts(4, env_config, policy_config, 0, 5)
        policy = ChunkPolicy(policy_config, dt=env_config.dt)
        rng = np.random.default_rng(2024)
        for context_scan, reference in zip(scan.contexts, references):
            assert context_scan.context_id == reference.context.context_id
            expected = _brute_force_spread(reference, policy, env_config, 10_000, rng)
            assert context_scan.contrast_std == pytest.approx(expected, rel=0.2)

    def test_default_scan_spread_matches_brute_force(self, env_config, policy_config):
        scan = run_noise_scan(16, 24, env_config, policy_config, n_boot=200)
        references = build_reference_contexts(16, env_config, policy_config, 0, 5)
        policy = ChunkPolicy(policy_config, dt=env_config.dt)
        rng = np.random.default_rng(2025)
        expected = [_brute_force_spread(r, policy, env_config, 2_000, rng) for r in references]
        observed = [c.contrast_std for c in scan.contexts]
        assert np.mean(observed) == pytest.approx(np.mean(expected), rel=0.2)

    def test_nonlinear_decomposition_is_not_additive(self):
        policy_config = PolicyConfig(nonlinear=True)
        gaps = []
        for preset in ("headroom", "floor"):
            result = run_decomposition(4, 8, EnvConfig.from_preset(preset), policy_config)
            assert all(row.btj_std > 0.0 and row.contrast_std > 0.0 for row in result.rows)
            gaps += [result.btj_quadrature_gap, result.contrast_quadrature_gap]
        assert max(abs(gap) for gap in gaps) > 1e-3


@pytest.mark.slow
class TestDirectionOracles:
    GRID = (-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0)

    @pytest.fixture
    def references(self, env_config, policy_config):
        return build_reference_contexts(4, env_config, policy_config, 0, 5)

    def test_gradient_aligned_sweep_is_linear(self, policy, env_config, references):
        for reference in references:
            probe = BoundaryProbe(reference.context, reference.z0, policy, env_config, 5)
            gradient = artifact_gradient(probe, reference.z1.values, "btj")
            d = SteeringDirection(gradient / np.linalg.norm(gradient), "gradient", reference.context.context_id)
            sweep = run_alpha_sweep(
                reference.context, reference.z0, reference.z1, d, self.GRID, policy, env_config, 5, probe
            )
            assert abs(sweep.r_btj) >= 0.99

    def test_orthogonal_sweep_is_flat(self, policy, env_config, references):
        rng = np.random.default_rng(7)
        for reference in references:
            probe = BoundaryProbe(reference.context, reference.z0, policy, env_config, 5)
            gradient = artifact_gradient(probe, reference.z1.values, "btj")
            d = null_direction(probe, reference.z1.values, rng)
            assert abs(float(d.direction @ gradient)) < 1e-9
            sweep = run_alpha_sweep(
                reference.context, reference.z0, reference.z1, d, self.GRID, policy, env_config, 5, probe
            )
            assert sweep.btj_range < 1e-6
            assert sweep.contrast_range < 1e-6

    def test_selected_directions_track_alpha(self, env_config, policy_config):
        strong = 0
        for seed in range(10):
            report = run_direction_experiment(
                4, env_config, policy_config, seed=seed, n_directions=12, epsilon=0.5, alpha_grid=self.GRID
            )
            strong += report.mean_abs_r_contrast >= 0.9
        assert strong >= 8


@pytest.mark.slow
class TestSteeringOracles:
    ARMS = ["baseline", "good", "bad"]

    def test_worker_count_does_not_change_results(self, env_config, policy_config):
        kwargs = dict(n_directions=3, n_boot=100)
        serial = run_trajectory_steering(["baseline", "bad"], 2, 0.5, 2, env_config, policy_config, workers=1, **kwargs)
        pooled = run_trajectory_steering(["baseline", "bad"], 2, 0.5, 2, env_config, policy_config, workers=2, **kwargs)
        assert serial == pooled

    def test_headroom_orders_contrast_and_success(self, env_config, policy_config):
        contrast_kept = success_kept = 0
        for seed in range(10):
            report = run_trajectory_steering(self.ARMS, 50, 1.0, 2, env_config, policy_config, seed=seed, n_boot=200)
            contrast_kept += bool(report.contrast_ordering)
            success_kept += bool(report.success_ordering)
        assert contrast_kept >= 9
        assert success_kept >= 8

    def test_ceiling_keeps_success_and_contrast_ordering(self, policy_config):
        env = EnvConfig.from_preset("ceiling")
        successes = {arm: [] for arm in self.ARMS}
        contrast_kept = bad_below = 0
        for seed in range(10):
            report = run_trajectory_steering(self.ARMS, 50, 2.0, 2, env, policy_config, seed=seed, n_boot=200)
            arms = _arms(report)
            for arm in self.ARMS:
                successes[arm] += arms[arm].successes
            contrast_kept += bool(report.contrast_ordering)
            bad_below += arms["bad"].success_rate.point < arms["baseline"].success_rate.point
        assert np.mean(successes["good"]) >= 0.98
        assert np.mean(successes["baseline"]) >= 0.98
        assert contrast_kept >= 9
        assert bad_below >= 8

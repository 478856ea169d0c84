"""Tests for jerk, phase profiles and episode-level contrast."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chunk_artifacts.chunking.metrics import (
    Control,
    boundary_timesteps,
    boundary_transition_jerk,
    contact_free_mask,
    control_mask,
    episode_contrast,
    jerk_contrast,
    jerk_series,
    matched_horizon_truncate,
    mean_jerk_time_course,
    phase_profile,
    second_difference_norms,
)
from chunk_artifacts.chunking.types import PhaseProfile
from chunk_artifacts.errors import (
    CapabilityError,
    ContractViolation,
    EmptySeriesError,
    UndefinedContrastError,
    UndefinedSummaryError,
)
from tests.conftest import boundary_pulse, build_trace

pytestmark = pytest.mark.unit


class TestJerkSeries:
    def test_constant_velocity_has_zero_jerk(self, make_trace):
        trace = make_trace(np.column_stack([np.full(20, 0.3), np.full(20, -0.1)]))
        ts, js = jerk_series(trace)
        assert ts[0] == 2
        assert len(ts) == 18
        np.testing.assert_array_equal(js, np.zeros(18))

    def test_known_second_difference(self, make_trace):
        trace = make_trace([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
        ts, js = jerk_series(trace)
        np.testing.assert_array_equal(ts, [2, 3, 4])
        assert js[0] == pytest.approx(np.hypot(-1.0, 1.0))
        assert js[1] == pytest.approx(1.0)
        assert js[2] == 0.0

    def test_window_drops_early_steps(self, make_trace):
        trace = make_trace(np.arange(12.0) ** 2)
        ts, js = jerk_series(trace, (0, 6))
        np.testing.assert_array_equal(ts, [2, 3, 4, 5])
        np.testing.assert_allclose(js, 2.0)

    def test_short_window_is_empty(self, make_trace):
        trace = make_trace(np.zeros(10))
        with pytest.raises(EmptySeriesError):
            jerk_series(trace, (3, 5))

    def test_window_outside_trace(self, make_trace):
        trace = make_trace(np.zeros(10))
        with pytest.raises(ContractViolation):
            jerk_series(trace, (0, 11))

    @settings(max_examples=40, deadline=None)
    @given(
        actions=arrays(np.float64, (15, 2), elements=st.floats(-5, 5)),
        offset=arrays(np.float64, (2,), elements=st.floats(-5, 5)),
        slope=arrays(np.float64, (2,), elements=st.floats(-5, 5)),
    )
    def test_invariant_to_affine_trends(self, actions, offset, slope):
        trend = offset + np.arange(15)[:, np.newaxis] * slope
        plain = second_difference_norms(actions)[2:]
        shifted = second_difference_norms(actions + trend)[2:]
        np.testing.assert_allclose(shifted, plain, atol=1e-9)


class TestPhaseProfileAndContrast:
    def test_boundary_pulse_profile(self, make_trace):
        trace = make_trace(boundary_pulse(40, stride=5, height=0.7), stride=5)
        profile = phase_profile(trace)
        np.testing.assert_allclose(profile.mean_jerk_by_phase, [0.7, 0.7, 0.0, 0.0, 0.0])
        assert jerk_contrast(profile) == pytest.approx(0.7)

    def test_phase_independent_jerk_has_zero_contrast(self, make_trace):
        trace = make_trace(0.5 * np.arange(50.0) ** 2, stride=5)
        assert jerk_contrast(phase_profile(trace)) == pytest.approx(0.0, abs=1e-9)

    def test_counts_cover_every_jerk_step(self, make_trace):
        trace = make_trace(np.zeros(23), stride=5)
        profile = phase_profile(trace)
        assert profile.counts_by_phase.sum() == 21

    def test_small_stride_rejected(self, make_trace):
        trace = make_trace(np.zeros(12), stride=3, horizon=4)
        with pytest.raises(ContractViolation):
            phase_profile(trace)

    def test_absent_phase_is_undefined(self):
        profile = PhaseProfile(np.array([1.0, 1.0, 0.5, 0.5, np.nan]), np.array([3, 3, 3, 3, 0]))
        assert not profile.is_present(4)
        with pytest.raises(UndefinedContrastError):
            jerk_contrast(profile)
        assert jerk_contrast(profile, interior_phases=[2, 3]) == pytest.approx(0.5)

    def test_phase_offset_shifts_boundaries(self, make_trace):
        actions = np.concatenate([np.zeros(2), boundary_pulse(30, stride=5) + 1.0])
        trace = make_trace(actions, stride=5, phase_offset=2)
        np.testing.assert_array_equal(boundary_timesteps(trace)[:3], [2, 7, 12])
        assert jerk_contrast(phase_profile(trace)) > 0.0


class TestBoundaryTransitionJerk:
    def test_value_at_boundary(self, make_trace):
        trace = make_trace(boundary_pulse(20, stride=5, height=2.0))
        assert boundary_transition_jerk(trace, 10) == pytest.approx(2.0)

    @pytest.mark.parametrize("t", [0, 7, 25])
    def test_rejects_non_boundaries(self, make_trace, t):
        trace = make_trace(np.zeros(20))
        with pytest.raises(ContractViolation):
            boundary_transition_jerk(trace, t)


class TestControls:
    def test_guard_band_around_transitions(self):
        contact = np.array([False] * 10 + [True] * 5 + [False] * 10)
        free = contact_free_mask(contact, guard_margin=2)
        expected = np.zeros(25, dtype=bool)
        expected[:8] = True
        expected[18:] = True
        np.testing.assert_array_equal(free, expected)

    def test_zero_margin_is_plain_complement(self):
        contact = np.array([False, True, True, False])
        np.testing.assert_array_equal(contact_free_mask(contact, 0), ~contact)

    def test_missing_mask_refuses_contact_controls(self, make_trace):
        trace = make_trace(np.zeros(20))
        with pytest.raises(CapabilityError):
            control_mask(trace, Control.CONTACT_FREE)
        assert control_mask(trace, "all").all()

    def test_contact_free_without_contact_equals_all(self, make_trace):
        actions = boundary_pulse(40) + 0.01 * np.sin(np.arange(40.0))
        trace = make_trace(actions, contact=[False] * 40)
        free = episode_contrast(trace, Control.CONTACT_FREE)
        everything = episode_contrast(trace, Control.ALL)
        assert free.jerk_contrast == pytest.approx(everything.jerk_contrast)
        assert free.n_timesteps == everything.n_timesteps == 38

    def test_first_n_counts_from_start(self, make_trace):
        trace = make_trace(boundary_pulse(60), contact=[False] * 60)
        summary = episode_contrast(trace, Control.CONTACT_FREE_FIRST_N, first_n=20)
        assert summary.window == (2, 20)
        assert summary.n_timesteps == 18

    def test_all_contact_is_undefined(self, make_trace):
        trace = make_trace(np.zeros(20), contact=[True] * 20)
        with pytest.raises(UndefinedSummaryError):
            episode_contrast(trace, Control.CONTACT_FREE)

    def test_summary_matches_profile_contrast(self, make_trace):
        trace = make_trace(boundary_pulse(35, height=0.4))
        summary = episode_contrast(trace)
        assert summary.jerk_contrast == pytest.approx(jerk_contrast(phase_profile(trace)))
        assert summary.boundary_transition_jerk == pytest.approx(0.4)


class TestMatchedHorizon:
    def test_truncates_to_shortest(self, make_trace):
        short = make_trace(np.zeros(12), outcome=True)
        long = make_trace(boundary_pulse(30), contact=[False] * 30, episode_id=1)
        truncated = matched_horizon_truncate([short, long])
        assert [t.length for t in truncated] == [12, 12]
        assert truncated[0] is short
        assert "truncated" in truncated[1].flags
        assert len(truncated[1].contact_mask) == 12
        assert {r.chunk_index for r in truncated[1].chunk_records} == {0, 1, 2}
        episode_contrast(truncated[1], Control.CONTACT_FREE)

    def test_equal_lengths_are_unchanged(self, make_trace):
        traces = [make_trace(np.zeros(15), episode_id=i) for i in range(3)]
        assert all(a is b for a, b in zip(matched_horizon_truncate(traces), traces))

    def test_empty_input(self):
        with pytest.raises(ContractViolation):
            matched_horizon_truncate([])

    def test_time_course_marks_boundaries(self):
        traces = [build_trace(boundary_pulse(20, height=h), episode_id=i) for i, h in enumerate([1.0, 3.0])]
        course = mean_jerk_time_course(traces)
        np.testing.assert_array_equal(course.boundary_timesteps, [5, 10, 15])
        assert course.mean_jerk[course.timesteps.tolist().index(10)] == pytest.approx(2.0)
        assert course.n_traces == 2

    def test_time_course_needs_matched_lengths(self, make_trace):
        with pytest.raises(ContractViolation):
            mean_jerk_time_course([make_trace(np.zeros(10)), make_trace(np.zeros(12))])

"""Jerk, phase profile and boundary-interior contrast metrics for chunked trajectories."""

from collections.abc import Iterable, Sequence
from enum import Enum
from typing import Optional

import numpy as np

from chunk_artifacts.chunking.types import ArtifactSummary, PhaseProfile, RolloutTrace, TimeCourse
from chunk_artifacts.errors import (
    CapabilityError,
    ContractViolation,
    EmptySeriesError,
    UndefinedContrastError,
    UndefinedSummaryError,
)
from chunk_artifacts.logging import get_logger

logger = get_logger("chunking.metrics")

DEFAULT_FIRST_N = 50
DEFAULT_GUARD_MARGIN = 2


class Control(str, Enum):
    """Window selection rules for episode-level summaries."""

    ALL = "all"
    CONTACT_FREE = "contact_free"
    CONTACT_FREE_FIRST_N = "contact_free_first_n"


def second_difference_norms(actions: np.ndarray) -> np.ndarray:
    """Per-step jerk of an action sequence; NaN for t < 2."""
    actions = np.asarray(actions, dtype=float)
    jerk = np.full(actions.shape[0], np.nan)
    if actions.shape[0] >= 3:
        second = actions[2:] - 2.0 * actions[1:-1] + actions[:-2]
        jerk[2:] = np.linalg.norm(second, axis=1)
    return jerk


def _check_window(trace: RolloutTrace, window: Optional[tuple[int, int]]) -> tuple[int, int]:
    if window is None:
        window = (0, trace.length)
    start, end = int(window[0]), int(window[1])
    if start < 0 or end > trace.length or start >= end:
        raise ContractViolation(f"window {window} is not inside [0, {trace.length})")
    if end - start < 3:
        raise EmptySeriesError(f"window {window} is shorter than 3 steps")
    return start, end


def jerk_series(
    trace: RolloutTrace, window: Optional[tuple[int, int]] = None
) -> tuple[np.ndarray, np.ndarray]:
    """
    Jerk ``j_t = ||a_t - 2 a_{t-1} + a_{t-2}||`` over a half-open timestep window.

    Timesteps before 2 have no jerk and are dropped, they are never zero-padded.

    Args:
        trace: Executed trajectory
        window: ``(start, end)`` half-open range, defaults to the whole trace

    Returns:
        Tuple of (timesteps, jerk values)

    Raises:
        EmptySeriesError: If the window is shorter than 3 steps
        ContractViolation: If the window lies outside the trace
    """
    start, end = _check_window(trace, window)
    jerk = second_difference_norms(trace.executed)
    ts = np.arange(max(start, 2), end)
    if ts.size == 0:
        raise EmptySeriesError(f"window ({start}, {end}) holds no timestep t >= 2")
    return ts, jerk[ts]


def profile_from_series(
    ts: np.ndarray, js: np.ndarray, stride: int, phase_offset: int = 0
) -> PhaseProfile:
    """Bin a jerk series by replanning phase."""
    phases = (np.asarray(ts, dtype=np.int64) - phase_offset) % stride
    counts = np.bincount(phases, minlength=stride)
    sums = np.bincount(phases, weights=np.asarray(js, dtype=float), minlength=stride)
    means = np.full(stride, np.nan)
    present = counts > 0
    means[present] = sums[present] / counts[present]
    return PhaseProfile(mean_jerk_by_phase=means, counts_by_phase=counts)


def phase_profile(
    trace: RolloutTrace, window: Optional[tuple[int, int]] = None
) -> PhaseProfile:
    """
    Phase-locked mean jerk over a window.

    Raises:
        ContractViolation: If the stride is below 4
    """
    if trace.stride < 4:
        raise ContractViolation(f"phase profile needs K >= 4, got K={trace.stride}")
    ts, js = jerk_series(trace, window)
    return profile_from_series(ts, js, trace.stride, trace.phase_offset)


def default_phase_sets(stride: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Boundary phases {0, 1} and interior phases {2, ..., K-1}."""
    return (0, 1), tuple(range(2, stride))


def jerk_contrast(
    profile: PhaseProfile,
    boundary_phases: Optional[Iterable[int]] = None,
    interior_phases: Optional[Iterable[int]] = None,
) -> float:
    """
    Mean jerk over boundary phases minus mean jerk over interior phases.

    Raises:
        UndefinedContrastError: If a phase set is empty or holds an absent phase
    """
    default_b, default_i = default_phase_sets(profile.stride)
    boundary = tuple(default_b if boundary_phases is None else boundary_phases)
    interior = tuple(default_i if interior_phases is None else interior_phases)
    if not boundary or not interior:
        raise UndefinedContrastError("boundary and interior phase sets must be nonempty")

    for phase in (*boundary, *interior):
        if not 0 <= phase < profile.stride:
            raise ContractViolation(f"phase {phase} outside [0, {profile.stride})")
        if not profile.is_present(phase):
            raise UndefinedContrastError(f"phase {phase} has no jerk samples")

    means = profile.mean_jerk_by_phase
    return float(np.mean(means[list(boundary)]) - np.mean(means[list(interior)]))


def boundary_timesteps(trace: RolloutTrace) -> np.ndarray:
    """All timesteps where a freshly generated chunk starts executing."""
    return np.flatnonzero(trace.phases == 0)


def boundary_transition_jerk(trace: RolloutTrace, boundary_t: int) -> float:
    """
    Jerk straddling the stitch point at a chunk boundary.

    Raises:
        ContractViolation: If ``boundary_t`` is not a boundary with ``t >= 2``
    """
    t = int(boundary_t)
    if t < 2 or t >= trace.length or (t - trace.phase_offset) % trace.stride != 0:
        raise ContractViolation(f"t={t} is not a chunk boundary with t >= 2")
    actions = trace.executed
    return float(np.linalg.norm(actions[t] - 2.0 * actions[t - 1] + actions[t - 2]))


def contact_free_mask(contact: np.ndarray, guard_margin: int = DEFAULT_GUARD_MARGIN) -> np.ndarray:
    """
    Steps without contact, minus a guard band around every contact transition.

    A transition at ``t`` is a change between steps ``t-1`` and ``t``; steps within
    ``guard_margin`` of it on either side are excluded.
    """
    contact = np.asarray(contact, dtype=bool)
    free = ~contact
    if guard_margin > 0:
        transitions = np.flatnonzero(contact[1:] != contact[:-1]) + 1
        n_steps = contact.shape[0]
        for t in transitions:
            free[max(0, t - guard_margin) : min(n_steps, t + guard_margin + 1)] = False
    return free


def control_mask(
    trace: RolloutTrace,
    control: Control | str = Control.ALL,
    first_n: int = DEFAULT_FIRST_N,
    guard_margin: int = DEFAULT_GUARD_MARGIN,
) -> np.ndarray:
    """Boolean mask over timesteps selected by a control rule, before the t >= 2 cut.

    The first-N rule counts contact-free steps from t = 0, so the window can hold fewer
    than N jerk timesteps.
    """
    control = Control(control)
    if control is Control.ALL:
        return np.ones(trace.length, dtype=bool)
    if trace.contact_mask is None:
        raise CapabilityError(f"control '{control.value}' needs a contact mask; trace has none")

    mask = contact_free_mask(trace.contact_mask, guard_margin)
    if control is Control.CONTACT_FREE_FIRST_N:
        if first_n < 1:
            raise ContractViolation("first_n must be >= 1")
        selected = np.flatnonzero(mask)[:first_n]
        mask = np.zeros(trace.length, dtype=bool)
        mask[selected] = True
    return mask


def episode_contrast(
    trace: RolloutTrace,
    control: Control | str = Control.ALL,
    first_n: int = DEFAULT_FIRST_N,
    guard_margin: int = DEFAULT_GUARD_MARGIN,
) -> ArtifactSummary:
    """
    Episode-level contrast over the window chosen by ``control``.

    Each selected jerk timestep ``t`` uses ``a_{t-2..t}`` whether or not those neighbours
    are selected.

    Raises:
        CapabilityError: If a contact control is requested on a trace without a mask
        UndefinedSummaryError: If the control selects no jerk timestep
        UndefinedContrastError: If the selected window misses a phase
    """
    control = Control(control)
    mask = control_mask(trace, control, first_n=first_n, guard_margin=guard_margin)
    mask[:2] = False
    ts = np.flatnonzero(mask)
    if ts.size == 0:
        raise UndefinedSummaryError(
            f"control '{control.value}' selects no jerk timestep in episode {trace.episode_id}"
        )

    jerk = second_difference_norms(trace.executed)
    js = jerk[ts]
    profile = profile_from_series(ts, js, trace.stride, trace.phase_offset)
    contrast = jerk_contrast(profile)

    at_boundary = ((ts - trace.phase_offset) % trace.stride) == 0
    btj = float(np.mean(js[at_boundary])) if np.any(at_boundary) else float("nan")

    return ArtifactSummary(
        jerk_contrast=contrast,
        boundary_transition_jerk=btj,
        phase_profile=profile,
        window=(int(ts[0]), int(ts[-1]) + 1),
        n_timesteps=int(ts.size),
        control=control.value,
    )


def matched_horizon_truncate(traces: Sequence[RolloutTrace]) -> list[RolloutTrace]:
    """
    Truncate every trace to the shortest length in the set.

    Raises:
        ContractViolation: If ``traces`` is empty
    """
    if not traces:
        raise ContractViolation("matched-horizon truncation needs at least one trace")
    horizon = min(trace.length for trace in traces)
    logger.debug(f"Matched horizon: truncating {len(traces)} traces to {horizon} steps")
    return [trace.truncate(horizon) for trace in traces]


def mean_jerk_time_course(traces: Sequence[RolloutTrace]) -> TimeCourse:
    """
    Mean jerk per timestep across equal-length traces, with replanning boundaries marked.

    Raises:
        ContractViolation: If traces are empty, differ in length, or differ in stride
    """
    if not traces:
        raise ContractViolation("time course needs at least one trace")
    lengths = {trace.length for trace in traces}
    strides = {(trace.stride, trace.phase_offset) for trace in traces}
    if len(lengths) != 1 or len(strides) != 1:
        raise ContractViolation("time course needs matched-horizon traces with one stride")

    first = traces[0]
    stacked = np.stack([second_difference_norms(trace.executed) for trace in traces])
    ts = np.arange(2, first.length)
    boundaries = boundary_timesteps(first)
    return TimeCourse(
        timesteps=ts,
        mean_jerk=stacked[:, 2:].mean(axis=0) if ts.size else np.empty(0),
        n_traces=len(traces),
        boundary_timesteps=boundaries[boundaries >= 2],
    )

"""Outcome association: do failed episodes carry larger boundary artifacts?"""

from collections.abc import Sequence
from typing import Optional

import numpy as np

from chunk_artifacts.chunking.metrics import (
    Control,
    episode_contrast,
    matched_horizon_truncate,
    mean_jerk_time_course,
    profile_from_series,
    second_difference_norms,
)
from chunk_artifacts.chunking.types import RolloutTrace
from chunk_artifacts.env.testbed import EnvConfig
from chunk_artifacts.errors import UndefinedContrastError, UndefinedSummaryError
from chunk_artifacts.experiments.parallel import run_baseline_episodes
from chunk_artifacts.logging import get_logger
from chunk_artifacts.models import (
    AssociationReport,
    AssociationRow,
    ProfileRow,
    Sidedness,
    TimeCourseRow,
)
from chunk_artifacts.policy.generator import PolicyConfig
from chunk_artifacts.seeding import Purpose, stream
from chunk_artifacts.stats.permutation import DEFAULT_N_PERM, permutation_test

logger = get_logger("experiments.association")

MIN_EPISODES = 10


def _group_profile(traces: Sequence[RolloutTrace], group: str) -> Optional[ProfileRow]:
    if not traces or traces[0].length < 3:
        return None
    ts = np.arange(2, traces[0].length)
    js = np.concatenate([second_difference_norms(trace.executed)[2:] for trace in traces])
    profile = profile_from_series(
        np.tile(ts, len(traces)), js, traces[0].stride, traces[0].phase_offset
    )
    means = [None if not np.isfinite(v) else float(v) for v in profile.mean_jerk_by_phase]
    return ProfileRow(
        group=group,  # type: ignore[arg-type]
        mean_jerk_by_phase=means,
        counts_by_phase=[int(c) for c in profile.counts_by_phase],
    )


def _group_time_course(traces: Sequence[RolloutTrace], group: str) -> Optional[TimeCourseRow]:
    if not traces or traces[0].length < 3:
        return None
    course = mean_jerk_time_course(traces)
    return TimeCourseRow(
        group=group,  # type: ignore[arg-type]
        timesteps=[int(t) for t in course.timesteps],
        mean_jerk=[float(v) for v in course.mean_jerk],
        boundary_timesteps=[int(t) for t in course.boundary_timesteps],
        n_traces=course.n_traces,
    )


def analyze_traces(
    traces: Sequence[RolloutTrace],
    controls: Sequence[str] = tuple(c.value for c in Control),
    first_n: int = 50,
    guard_margin: int = 2,
    n_perm: int = DEFAULT_N_PERM,
    sidedness: Sidedness = "greater",
    seed: int = 0,
) -> AssociationReport:
    """
    Compare episode contrast between failed and successful episodes under each control.

    ``delta`` is ``failure mean - success mean``; the permutation test uses the failure
    group as group b. Invalid traces are dropped. With a single outcome present every row
    is emitted with ``applicable=False`` and no test.

    Raises:
        CapabilityError: If a contact control is requested on traces without masks
    """
    valid = sorted((t for t in traces if t.valid), key=lambda t: t.episode_id)
    flags: list[str] = []
    if len(valid) < len(traces):
        flags.append(f"dropped_invalid:{len(traces) - len(valid)}")
    successes = [t for t in valid if t.outcome]
    failures = [t for t in valid if not t.outcome]
    applicable = bool(successes) and bool(failures)
    if not applicable:
        flags.append("single_outcome")
        logger.warning("Only one outcome group present; tests are marked inapplicable")
    if len(valid) < MIN_EPISODES:
        flags.append("few_episodes")

    rows = []
    for index, control in enumerate(controls):
        values: dict[bool, list[float]] = {True: [], False: []}
        excluded = 0
        for trace in valid:
            try:
                summary = episode_contrast(
                    trace, control, first_n=first_n, guard_margin=guard_margin
                )
            except (UndefinedSummaryError, UndefinedContrastError) as e:
                logger.debug(f"Episode {trace.episode_id} excluded under {control}: {e}")
                excluded += 1
                continue
            values[trace.outcome].append(summary.jerk_contrast)

        ok, bad = values[True], values[False]
        success_mean = float(np.mean(ok)) if ok else None
        failure_mean = float(np.mean(bad)) if bad else None
        row_applicable = bool(ok) and bool(bad)
        test = None
        if row_applicable:
            test = permutation_test(
                ok,
                bad,
                n_perm=n_perm,
                sidedness=sidedness,
                rng=stream(seed, Purpose.PERMUTATION, index),
            )
        rows.append(
            AssociationRow(
                control=Control(control).value,
                n_success=len(ok),
                n_failure=len(bad),
                success_mean=success_mean,
                failure_mean=failure_mean,
                delta=None if test is None else test.observed_delta,
                test=test,
                applicable=row_applicable,
                n_excluded=excluded,
            )
        )
        logger.info(
            f"{Control(control).value}: success={success_mean} failure={failure_mean} "
            f"p={None if test is None else round(test.p_value, 5)} ({sidedness})"
        )

    matched = matched_horizon_truncate(valid) if valid else []
    horizon = matched[0].length if matched else None
    matched_ok = [t for t in matched if t.outcome]
    matched_bad = [t for t in matched if not t.outcome]
    profiles = [
        row
        for row in (_group_profile(matched_ok, "success"), _group_profile(matched_bad, "failure"))
        if row is not None
    ]
    courses = [
        row
        for row in (
            _group_time_course(matched_ok, "success"),
            _group_time_course(matched_bad, "failure"),
        )
        if row is not None
    ]

    return AssociationReport(
        n_episodes=len(valid),
        n_success=len(successes),
        rows=rows,
        matched_horizon=horizon,
        profiles=profiles,
        time_courses=courses,
        flags=flags,
        decisions={
            "sidedness": sidedness,
            "guard_margin": guard_margin,
            "first_n": first_n,
            "first_n_counting": "first N contact-free steps from t=0, then t >= 2",
            "contact_definition": "carrying flag of the testbed (or the recorded mask)",
            "phase_zero": "first executed action of a new chunk",
        },
    )


def run_outcome_association(
    n_episodes: int,
    env_config: EnvConfig,
    policy_config: PolicyConfig,
    controls: Sequence[str] = tuple(c.value for c in Control),
    seed: int = 0,
    stride: int = 5,
    first_n: int = 50,
    guard_margin: int = 2,
    n_perm: int = DEFAULT_N_PERM,
    sidedness: Sidedness = "greater",
    workers: int = 1,
) -> tuple[AssociationReport, list[RolloutTrace]]:
    """Roll out ``n_episodes`` unsteered episodes and analyze them."""
    logger.info(
        f"Outcome association: {n_episodes} episodes, K={stride}, preset regime "
        f"{env_config.regime}, eps_dev={policy_config.epsilon_dev}, seed={seed}"
    )
    traces = run_baseline_episodes(
        policy_config, env_config, stride, seed, range(n_episodes), workers=workers
    )
    report = analyze_traces(
        traces,
        controls,
        first_n=first_n,
        guard_margin=guard_margin,
        n_perm=n_perm,
        sidedness=sidedness,
        seed=seed,
    )
    return report, traces

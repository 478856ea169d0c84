"""Trajectory-level steering arms and pooling of their reports."""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional


from chunk_artifacts.chunking.metrics import episode_contrast
from chunk_artifacts.env.contexts import ContextSnapshot
from chunk_artifacts.env.rollout import rollout
from chunk_artifacts.env.testbed import EnvConfig
from chunk_artifacts.errors import (
    ContractViolation,
    RunnerError,
    UndefinedContrastError,
    UndefinedSummaryError,
)
from chunk_artifacts.experiments.directions import Metric, search_direction
from chunk_artifacts.experiments.parallel import ordered_map, policy_for
from chunk_artifacts.logging import get_logger
from chunk_artifacts.models import GroupReport, SteeringReport
from chunk_artifacts.policy.generator import ChunkPolicy, PolicyConfig
from chunk_artifacts.policy.noise import NoiseVector, SteeringDirection, steer
from chunk_artifacts.seeding import Purpose, stream
from chunk_artifacts.stats.groups import build_group_report

logger = get_logger("experiments.steering")

ARM_SIGNS = {"baseline": 0.0, "good": -1.0, "bad": 1.0}


class TrajectorySteeringPlan:
    """
    Noise hook for one episode of one arm.

    Chunks before ``warmup_boundaries`` run unsteered. At chunk ``warmup_boundaries`` a
    direction is searched on the live context with the current chunk noise as ``z0`` and a
    fresh next-chunk draw as ``z1``; every later chunk's noise is shifted by
    ``sign * |alpha|`` along it. A degenerate or failed search leaves the episode on the
    baseline path and sets ``fallback``.
    """

    def __init__(
        self,
        arm: str,
        policy: ChunkPolicy,
        env_config: EnvConfig,
        stride: int,
        seed: int,
        episode_id: int,
        alpha_magnitude: float = 0.5,
        warmup_boundaries: int = 2,
        n_directions: int = 12,
        epsilon: float = 0.5,
        metric: Metric = "contrast",
        research_each_boundary: bool = False,
    ):
        if arm not in ARM_SIGNS:
            raise ContractViolation(f"unknown arm '{arm}'")
        if alpha_magnitude <= 0 or warmup_boundaries < 1:
            raise ContractViolation("need |alpha| > 0 and warmup_boundaries >= 1")
        self.arm = arm
        self.policy = policy
        self.env_config = env_config
        self.stride = stride
        self.seed = seed
        self.episode_id = episode_id
        self.alpha = ARM_SIGNS[arm] * abs(alpha_magnitude)
        self.warmup = warmup_boundaries
        self.n_directions = n_directions
        self.epsilon = epsilon
        self.metric = metric
        self.research = research_each_boundary
        self.direction: Optional[SteeringDirection] = None
        self.fallback = False
        self.searches = 0

    def _search(self, context: ContextSnapshot, chunk_index: int, z0: NoiseVector) -> None:
        next_rng = stream(self.seed, Purpose.NEXT_NOISE, self.episode_id, chunk_index)
        z1 = self.policy.draw_noise(next_rng, f"e{self.episode_id}c{chunk_index + 1}/search")
        self.searches += 1
        try:
            direction = search_direction(
                context,
                z0,
                z1,
                self.policy,
                self.env_config,
                stride=self.stride,
                n_directions=self.n_directions,
                epsilon=self.epsilon,
                metric=self.metric,
                rng=stream(self.seed, Purpose.DIRECTIONS, self.episode_id, chunk_index),
            )
        except RunnerError as e:
            logger.debug(f"Episode {self.episode_id}: search failed at chunk {chunk_index}: {e}")
            direction = None
        if direction is None or direction.degenerate:
            self.direction = None
            self.fallback = True
        else:
            self.direction = direction

    def noise_for_chunk(self, context: ContextSnapshot, chunk_index: int, z: NoiseVector) -> NoiseVector:
        if self.alpha == 0.0 or chunk_index < self.warmup:
            return z
        steered = z
        if self.direction is not None and chunk_index > self.warmup:
            steered = steer(z, self.direction, self.alpha)
        if chunk_index == self.warmup or (self.research and not self.fallback):
            self._search(context, chunk_index, steered)
        return steered


@dataclass(frozen=True)
class EpisodeOutcome:
    episode_id: int
    success: bool
    contrast: Optional[float]
    fallback: bool
    valid: bool


def _steered_episode(job: tuple) -> EpisodeOutcome:
    arm, episode_id, policy_config, env_config, stride, seed, options = job
    policy = policy_for(policy_config, env_config.dt, stride)
    plan = TrajectorySteeringPlan(arm, policy, env_config, stride, seed, episode_id, **options)
    trace = rollout(policy, env_config, stride, seed, episode_id, steering_plan=plan)
    contrast: Optional[float] = None
    if trace.valid:
        try:
            contrast = episode_contrast(trace).jerk_contrast
        except (UndefinedSummaryError, UndefinedContrastError):
            contrast = None
    return EpisodeOutcome(episode_id, trace.outcome, contrast, plan.fallback, trace.valid)


def _ordering(groups: Sequence[GroupReport]) -> tuple[Optional[bool], Optional[bool]]:
    by_arm = {g.arm: g for g in groups}
    if not {"good", "baseline", "bad"} <= set(by_arm):
        return None, None
    good, base, bad = by_arm["good"], by_arm["baseline"], by_arm["bad"]
    if not (good.contrast_mean and base.contrast_mean and bad.contrast_mean):
        return None, None
    contrast = good.contrast_mean.point < base.contrast_mean.point < bad.contrast_mean.point
    success = None
    if good.success_rate and base.success_rate and bad.success_rate:
        success = good.success_rate.point > base.success_rate.point > bad.success_rate.point
    return contrast, success


def run_trajectory_steering(
    arms: Sequence[str],
    n_episodes_per_arm: int,
    alpha_magnitude: float,
    warmup_boundaries: int,
    env_config: EnvConfig,
    policy_config: PolicyConfig,
    seed: int = 0,
    stride: int = 5,
    n_directions: int = 12,
    epsilon: float = 0.5,
    metric: Metric = "contrast",
    research_each_boundary: bool = False,
    episode_offset: int = 0,
    n_boot: int = 10_000,
    level: float = 0.95,
    workers: int = 1,
    preset: str = "",
) -> SteeringReport:
    """
    Roll out every arm over the same episode seeds and report success and contrast.

    Arms share scene jitter, slip draws and base chunk noise, so they differ only by the
    steering shift. ``good`` uses ``-|alpha|`` and ``bad`` uses ``+|alpha|`` along the
    direction, whose ``+alpha`` side increases the artifact.

    Raises:
        ContractViolation: On unknown arms, |alpha| <= 0 or warmup < 1
    """
    if alpha_magnitude <= 0 or warmup_boundaries < 1:
        raise ContractViolation("need |alpha| > 0 and warmup_boundaries >= 1")
    unknown = set(arms) - set(ARM_SIGNS)
    if unknown:
        raise ContractViolation(f"unknown arms {sorted(unknown)}")

    logger.info(
        f"Trajectory steering: arms={list(arms)}, {n_episodes_per_arm} episodes/arm, "
        f"|alpha|={alpha_magnitude}, warmup={warmup_boundaries}, regime={env_config.regime}"
    )
    options = {
        "alpha_magnitude": alpha_magnitude,
        "warmup_boundaries": warmup_boundaries,
        "n_directions": n_directions,
        "epsilon": epsilon,
        "metric": metric,
        "research_each_boundary": research_each_boundary,
    }
    episode_ids = range(episode_offset, episode_offset + n_episodes_per_arm)

    groups = []
    n_fallback = 0
    for arm in arms:
        jobs = [(arm, e, policy_config, env_config, stride, seed, options) for e in episode_ids]
        outcomes = ordered_map(_steered_episode, jobs, workers=workers, desc=f"Arm {arm}")
        fallbacks = [o.episode_id for o in outcomes if o.fallback]
        n_fallback += len(fallbacks)
        flags = [f"fallback_to_baseline:{e}" for e in fallbacks]
        flags += [f"invalid:{o.episode_id}" for o in outcomes if not o.valid]
        if fallbacks:
            logger.warning(f"Arm {arm}: {len(fallbacks)} episodes fell back to baseline")
        groups.append(
            build_group_report(
                arm,
                [o.episode_id for o in outcomes],
                [o.success for o in outcomes],
                [o.contrast if o.valid else None for o in outcomes],
                n_boot=n_boot,
                level=level,
                seed=seed,
                regimes=[env_config.regime],
                flags=flags,
            )
        )

    contrast_ok, success_ok = _ordering(groups)
    return SteeringReport(
        preset=preset or env_config.regime,
        groups=groups,
        contrast_ordering=contrast_ok,
        success_ordering=success_ok,
        n_fallback=n_fallback,
        decisions={
            "alpha_magnitude": alpha_magnitude,
            "warmup_boundaries": warmup_boundaries,
            "steered_noise": "upcoming chunk noise, from the chunk after the search onward",
            "direction_reuse": "re-search each boundary" if research_each_boundary else "one per episode",
            "degenerate_search": "fall back to baseline",
            "epsilon_role": "probe offset",
            "episode_offset": episode_offset,
            "seed": seed,
        },
    )


def aggregate_reports(
    reports: Sequence[SteeringReport], n_boot: int = 10_000, level: float = 0.95, seed: int = 0
) -> SteeringReport:
    """
    Pool per-episode values of several steering reports arm by arm and recompute intervals.

    Colliding episode ids across runs are re-keyed as ``run * 1_000_000 + id`` and flagged.
    Pools that mix scene regimes carry a ``mixed_regimes`` flag, since saturated regimes
    compress success differences.

    Raises:
        ContractViolation: If no reports are given or their arm sets differ
    """
    if not reports:
        raise ContractViolation("aggregate needs at least one report")
    arm_sets = {tuple(sorted(g.arm for g in report.groups)) for report in reports}
    if len(arm_sets) != 1:
        raise ContractViolation(f"reports have mismatched arms: {sorted(arm_sets)}")
    arms = [g.arm for g in reports[0].groups]

    pooled = []
    for arm in arms:
        ids: list[int] = []
        wins: list[bool] = []
        values: list[Optional[float]] = []
        regimes: list[str] = []
        flags: list[str] = []
        seen: set[int] = set()
        collided = False
        for run, report in enumerate(reports):
            group = next(g for g in report.groups if g.arm == arm)
            regimes.extend(group.regimes or [report.preset])
            run_ids = group.episode_ids
            if seen & set(run_ids):
                collided = True
                run_ids = [run * 1_000_000 + e for e in run_ids]
            seen.update(run_ids)
            ids.extend(run_ids)
            wins.extend(group.successes)
            values.extend(group.contrasts)
        if collided:
            flags.append("rekeyed_episode_ids")
        if len(set(regimes)) > 1:
            flags.append("mixed_regimes")
        pooled.append(
            build_group_report(
                arm, ids, wins, values, n_boot=n_boot, level=level, seed=seed, regimes=regimes, flags=flags
            )
        )

    contrast_ok, success_ok = _ordering(pooled)
    regimes = sorted({r for g in pooled for r in g.regimes})
    logger.info(f"Pooled {len(reports)} reports over regimes {regimes}")
    return SteeringReport(
        preset="+".join(regimes),
        groups=pooled,
        contrast_ordering=contrast_ok,
        success_ordering=success_ok,
        n_fallback=sum(r.n_fallback for r in reports),
        decisions={"pooled_runs": len(reports), "regimes": regimes},
    )

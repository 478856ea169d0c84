"""Frozen observation contexts taken at chunk boundaries of recorded rollouts."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from chunk_artifacts.chunking.metrics import boundary_timesteps
from chunk_artifacts.chunking.types import RolloutTrace
from chunk_artifacts.env.testbed import EnvConfig, EnvState, PointMassEnv, initial_state
from chunk_artifacts.errors import CapabilityError, ContractViolation, RunnerError
from chunk_artifacts.logging import get_logger

logger = get_logger("env.contexts")


@dataclass(frozen=True, eq=False)
class ContextSnapshot:
    """Environment state from which chunks can be regenerated reproducibly."""

    state: EnvState
    context_id: str
    episode_id: int = -1
    timestep: int = 0


def _thirds(t: int, length: int) -> int:
    return min(2, (3 * t) // max(length, 1))


def _evenly(candidates: list, count: int) -> list:
    if count <= 0 or not candidates:
        return []
    if count >= len(candidates):
        return list(candidates)
    picks = np.linspace(0, len(candidates) - 1, count).round().astype(int)
    return [candidates[i] for i in picks]


def snapshot_contexts(
    traces: Sequence[RolloutTrace],
    n_contexts: int,
    env_config: EnvConfig,
    selection_rule: str = "stratified",
) -> list[ContextSnapshot]:
    """
    Deterministically select boundary states from testbed traces.

    Candidates are boundary timesteps ``t >= K`` of every trace. The stratified rule splits
    them into early, mid and late thirds of their episode and takes evenly spaced picks from
    each third, topping up from the remaining candidates when a third runs short. States are
    rebuilt by kinematic replay of the recorded actions from the seeded episode start.

    Raises:
        ContractViolation: If ``traces`` is empty or the rule is unknown
        CapabilityError: If a trace carries no testbed seed record
        RunnerError: If fewer boundaries than ``n_contexts`` are available
    """
    if not traces:
        raise ContractViolation("snapshot_contexts needs at least one trace")
    if selection_rule not in ("stratified", "first"):
        raise ContractViolation(f"unknown selection rule '{selection_rule}'")

    candidates: list[tuple[int, int, int]] = []
    by_episode = {}
    for trace in sorted(traces, key=lambda tr: tr.episode_id):
        if trace.source != "testbed" or "root" not in trace.seed_record:
            raise CapabilityError(
                f"episode {trace.episode_id} has no testbed seed record; cannot rebuild states"
            )
        by_episode[trace.episode_id] = trace
        for t in boundary_timesteps(trace):
            if t >= trace.stride:
                candidates.append((_thirds(int(t), trace.length), trace.episode_id, int(t)))

    if len(candidates) < n_contexts:
        raise RunnerError(
            f"requested {n_contexts} contexts but only {len(candidates)} boundaries are available"
        )

    if selection_rule == "first":
        chosen = sorted(candidates, key=lambda c: (c[1], c[2]))[:n_contexts]
    else:
        strata = [sorted(c for c in candidates if c[0] == k) for k in range(3)]
        quotas = [n_contexts // 3 + (1 if k < n_contexts % 3 else 0) for k in range(3)]
        chosen = []
        for stratum, quota in zip(strata, quotas):
            chosen.extend(_evenly(stratum, quota))
        shortfall = n_contexts - len(chosen)
        if shortfall:
            rest = [c for c in sorted(candidates) if c not in set(chosen)]
            chosen.extend(_evenly(rest, shortfall))
        chosen.sort(key=lambda c: (c[1], c[2]))

    env = PointMassEnv(env_config)
    snapshots = []
    for _, episode_id, t in chosen:
        trace = by_episode[episode_id]
        start = initial_state(env_config, int(trace.seed_record["root"]), episode_id)
        state = env.replay(start, trace.executed[:t])
        snapshots.append(
            ContextSnapshot(
                state=state, context_id=f"e{episode_id}t{t}", episode_id=episode_id, timestep=t
            )
        )
    logger.debug(f"Selected {len(snapshots)} contexts from {len(candidates)} boundaries")
    return snapshots

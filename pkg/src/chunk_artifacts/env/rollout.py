"""Receding-horizon rollout: generate a chunk, execute K actions, replan."""

from typing import TYPE_CHECKING, Optional, Protocol

import numpy as np

from chunk_artifacts.chunking.types import ChunkRecord, RolloutTrace
from chunk_artifacts.env.contexts import ContextSnapshot
from chunk_artifacts.env.testbed import EnvConfig, PointMassEnv, sanitize_action
from chunk_artifacts.errors import ChunkArtifactError, ContractViolation
from chunk_artifacts.logging import get_logger

if TYPE_CHECKING:
    from chunk_artifacts.policy.generator import ChunkPolicy
    from chunk_artifacts.policy.noise import NoiseVector

logger = get_logger("env.rollout")


class SteeringPlan(Protocol):
    """Hook deciding the noise used for each chunk of an episode."""

    def noise_for_chunk(
        self, context: ContextSnapshot, chunk_index: int, z: "NoiseVector"
    ) -> "NoiseVector":
        ...


def rollout(
    policy: "ChunkPolicy",
    env_config: EnvConfig,
    stride: int,
    seed: int,
    episode_id: int,
    steering_plan: Optional[SteeringPlan] = None,
) -> RolloutTrace:
    """
    Run one episode with replanning every ``stride`` executed steps.

    At each boundary the current state is frozen into a context, the chunk noise is drawn
    from the ``(seed, episode_id, chunk_index)`` stream (and optionally steered), a chunk of
    H actions is generated and its first K actions are executed. The episode ends on
    success, drop or T_max. A generation failure aborts the episode and returns a trace
    flagged invalid; when the very first chunk fails that trace has no steps.

    Args:
        policy: Chunk generator, its config carries the horizon H
        env_config: Scene parameters
        stride: Replanning stride K
        seed: Root seed of the run
        episode_id: Episode index, keys every stream of the episode
        steering_plan: Optional hook modifying each chunk's noise

    Returns:
        RolloutTrace

    Raises:
        ContractViolation: If K > H
    """
    horizon = policy.config.horizon
    if not 1 <= stride <= horizon:
        raise ContractViolation(f"need 1 <= K <= H, got K={stride} H={horizon}")
    env_config.check_stride(stride)

    env = PointMassEnv(env_config)
    state = env.reset(seed, episode_id)

    executed: list[np.ndarray] = []
    contact: list[bool] = []
    step_chunks: list[int] = []
    records: list[ChunkRecord] = []
    reason: Optional[str] = None
    valid = True
    flags: list[str] = []
    chunk_index = 0

    while reason is None:
        context = ContextSnapshot(
            state=state,
            context_id=f"e{episode_id}t{state.step}",
            episode_id=episode_id,
            timestep=state.step,
        )
        z = policy.sample_noise(seed, episode_id, chunk_index)
        try:
            if steering_plan is not None:
                z = steering_plan.noise_for_chunk(context, chunk_index, z)
            chunk = policy.generate_chunk(context, z, chunk_index)
        except (ChunkArtifactError, FloatingPointError, np.linalg.LinAlgError) as e:
            logger.warning(f"Episode {episode_id}: chunk {chunk_index} failed, aborting: {e}")
            valid = False
            flags.append("generation_failed")
            reason = "invalid"
            break

        steering = z.steering
        records.append(
            ChunkRecord(
                chunk_index=chunk_index,
                context_id=context.context_id,
                noise_id=z.noise_id,
                alpha=None if steering is None else steering[0],
                direction_id=None if steering is None else steering[1],
            )
        )
        for k in range(stride):
            action = sanitize_action(chunk.actions[k], env_config)
            state, in_contact, reason = env.step(action)
            executed.append(action)
            contact.append(in_contact)
            step_chunks.append(chunk_index)
            if reason is not None:
                break
        chunk_index += 1

    if valid and len(executed) < stride:
        valid = False
        flags.append("shorter_than_stride")

    success = reason == "success"
    logger.debug(
        f"Episode {episode_id}: {reason} after {len(executed)} steps, {chunk_index} chunks"
    )
    return RolloutTrace(
        executed=np.asarray(executed, dtype=float).reshape(len(executed), policy.config.action_dim),
        stride=stride,
        horizon=horizon,
        chunk_records=tuple(records),
        step_chunks=np.asarray(step_chunks, dtype=np.int64),
        contact_mask=np.asarray(contact, dtype=bool),
        outcome=success,
        episode_id=episode_id,
        seed_record={
            "root": int(seed),
            "episode": int(episode_id),
            "feature_seed": int(policy.config.feature_seed),
        },
        terminal_reason=reason or "timeout",
        valid=valid,
        flags=tuple(flags),
        source="testbed",
    )

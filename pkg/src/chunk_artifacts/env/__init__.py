"""Point-mass testbed, frozen contexts and the rollout loop."""

from chunk_artifacts.env.contexts import ContextSnapshot, snapshot_contexts
from chunk_artifacts.env.rollout import SteeringPlan, rollout
from chunk_artifacts.env.testbed import (
    SCENE_PRESETS,
    EnvConfig,
    EnvState,
    PointMassEnv,
    drop_probability,
    env_step,
    initial_state,
)

__all__ = [
    "SCENE_PRESETS",
    "ContextSnapshot",
    "EnvConfig",
    "EnvState",
    "PointMassEnv",
    "SteeringPlan",
    "drop_probability",
    "env_step",
    "initial_state",
    "rollout",
    "snapshot_contexts",
]

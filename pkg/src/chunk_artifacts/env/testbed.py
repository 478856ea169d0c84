"""Point-mass grasp-and-transport testbed with a jerk-driven slip channel.

The agent commands a 2D velocity each step. It picks the object up automatically when it
comes within the pickup radius and must carry it to the goal. While carrying, every step
can drop the object with a probability that rises logistically with the jerk of the last
three commanded actions, so boundary artifacts cause failures by construction.
"""

from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from chunk_artifacts.chunking.types import frozen_array
from chunk_artifacts.errors import ConfigError
from chunk_artifacts.seeding import Purpose, stream

Regime = Literal["headroom", "ceiling", "floor", "custom"]

# Thresholds for the default policy at K = 5, set from its per-boundary jerk tail. The
# slow preset tests pin the success bands; after changing policy defaults re-derive them
# with `chunkart calibrate`.
SCENE_PRESETS: dict[str, dict[str, object]] = {
    "headroom": {"slip_threshold": 0.50, "slip_sharpness": 60.0, "regime": "headroom"},
    "ceiling": {"slip_threshold": 0.78, "slip_sharpness": 60.0, "regime": "ceiling"},
    "floor": {"slip_threshold": 0.36, "slip_sharpness": 60.0, "regime": "floor"},
}


class EnvConfig(BaseModel):
    """Testbed scene and physics parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    start: tuple[float, float] = Field(default=(0.0, 0.0), description="Agent start position")
    object_position: tuple[float, float] = Field(default=(1.0, 0.0), description="Object position")
    goal: tuple[float, float] = Field(default=(1.0, 1.0), description="Goal position")
    scene_jitter: float = Field(
        default=0.15, ge=0, description="Half-width of per-episode uniform object/goal jitter"
    )
    pickup_radius: float = Field(default=0.08, gt=0, description="Auto-grasp radius")
    goal_radius: float = Field(default=0.1, gt=0, description="Success radius around the goal")
    max_steps: int = Field(default=200, ge=1, description="Episode step limit T_max")
    slip_threshold: float = Field(default=0.50, gt=0, description="Jerk at 50% drop hazard")
    slip_sharpness: float = Field(default=60.0, gt=0, description="Logistic slope kappa")
    base_drop_rate: float = Field(
        default=0.0, ge=0, lt=1, description="Jerk-independent per-step drop floor"
    )
    action_clip: float = Field(default=5.0, gt=0, description="Per-coordinate action bound")
    dt: float = Field(default=0.1, gt=0, description="Physics timestep")
    regime: Regime = Field(default="headroom", description="Regime label carried into reports")

    @model_validator(mode="after")
    def _radii(self) -> "EnvConfig":
        if self.goal_radius <= 0 or self.pickup_radius <= 0:
            raise ValueError("radii must be positive")
        return self

    @classmethod
    def from_preset(cls, preset: str = "headroom", **overrides: object) -> "EnvConfig":
        """Build a config from a named scene preset plus field overrides."""
        if preset not in SCENE_PRESETS:
            raise ConfigError(
                "env.preset", f"unknown preset '{preset}', choose from {sorted(SCENE_PRESETS)}"
            )
        values = {**SCENE_PRESETS[preset], **overrides}
        return cls(**values)

    def check_stride(self, stride: int) -> None:
        if self.max_steps < 4 * stride:
            raise ConfigError("env.max_steps", f"T_max={self.max_steps} must be >= 4K={4 * stride}")


@dataclass(frozen=True, eq=False)
class EnvState:
    """Full testbed state. ``prev_actions`` holds the last two commanded actions, oldest first."""

    position: np.ndarray
    velocity: np.ndarray
    object_position: np.ndarray
    goal: np.ndarray
    carrying: bool = False
    dropped: bool = False
    step: int = 0
    prev_actions: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        for name in ("position", "velocity", "object_position", "goal"):
            object.__setattr__(self, name, frozen_array(getattr(self, name), ndim=1))
        prev = self.prev_actions
        if prev is None:
            prev = np.zeros((2, self.position.shape[0]))
        object.__setattr__(self, "prev_actions", frozen_array(prev, ndim=2))

    def same_as(self, other: "EnvState") -> bool:
        """Exact equality of every field."""
        return (
            self.carrying == other.carrying
            and self.dropped == other.dropped
            and self.step == other.step
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("position", "velocity", "object_position", "goal", "prev_actions")
            )
        )


def drop_probability(jerk: float, config: EnvConfig) -> float:
    """Per-step drop hazard while carrying; nondecreasing in jerk."""
    slip = float(expit(config.slip_sharpness * (jerk - config.slip_threshold)))
    return config.base_drop_rate + (1.0 - config.base_drop_rate) * slip


def sanitize_action(action: np.ndarray, config: EnvConfig) -> np.ndarray:
    """Replace non-finite entries by 0 and clip to the action bound."""
    action = np.nan_to_num(np.asarray(action, dtype=float), nan=0.0, posinf=0.0, neginf=0.0)
    return np.clip(action, -config.action_clip, config.action_clip)


def initial_state(config: EnvConfig, root_seed: int, episode_id: int) -> EnvState:
    """Episode start state with seeded scene jitter of object and goal."""
    rng = stream(root_seed, Purpose.SCENE, episode_id)
    jitter = config.scene_jitter
    obj = np.asarray(config.object_position) + rng.uniform(-jitter, jitter, size=2)
    goal = np.asarray(config.goal) + rng.uniform(-jitter, jitter, size=2)
    return EnvState(
        position=np.asarray(config.start, dtype=float),
        velocity=np.zeros(2),
        object_position=obj,
        goal=goal,
    )


def env_step(
    state: EnvState,
    action: np.ndarray,
    config: EnvConfig,
    rng: Optional[np.random.Generator] = None,
) -> tuple[EnvState, bool]:
    """
    Advance the testbed by one step.

    One uniform is drawn from ``rng`` on every step, carrying or not, so arms that share
    a slip stream see common random numbers. With ``rng=None`` the drop channel is off
    and the step is a pure kinematic replay.

    Args:
        state: Current state
        action: Commanded velocity
        config: Scene parameters
        rng: Slip stream, or None to disable drops

    Returns:
        Tuple of (next state, contact flag for this step)
    """
    commanded = sanitize_action(action, config)
    if state.step >= 2:
        jerk = float(np.linalg.norm(commanded - 2.0 * state.prev_actions[1] + state.prev_actions[0]))
    else:
        jerk = 0.0
    draw = rng.random() if rng is not None else None

    position = state.position + config.dt * commanded
    carrying = state.carrying
    dropped = state.dropped
    obj = state.object_position
    grasped = False

    if state.carrying:
        obj = position
        if draw is not None and draw < drop_probability(jerk, config):
            carrying = False
            dropped = True
    elif not state.dropped and np.linalg.norm(position - obj) <= config.pickup_radius:
        carrying = True
        grasped = True
        obj = position

    next_state = replace(
        state,
        position=position,
        velocity=commanded,
        object_position=obj,
        carrying=carrying,
        dropped=dropped,
        step=state.step + 1,
        prev_actions=np.stack([state.prev_actions[1], commanded]),
    )
    return next_state, bool(state.carrying or grasped)


def is_success(state: EnvState, config: EnvConfig) -> bool:
    return bool(
        state.carrying and np.linalg.norm(state.object_position - state.goal) <= config.goal_radius
    )


def terminal_reason(state: EnvState, config: EnvConfig) -> Optional[str]:
    """``success``, ``drop`` or ``timeout`` when the episode is over, else None."""
    if is_success(state, config):
        return "success"
    if state.dropped:
        return "drop"
    if state.step >= config.max_steps:
        return "timeout"
    return None


class PointMassEnv:
    """Single-owner mutable wrapper around the pure step function."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self._state: Optional[EnvState] = None
        self._slip_rng: Optional[np.random.Generator] = None

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise RuntimeError("call reset() before using the environment")
        return self._state

    def reset(self, root_seed: int, episode_id: int, drops: bool = True) -> EnvState:
        """Start episode ``episode_id``; the slip stream is keyed by the same pair."""
        self._state = initial_state(self.config, root_seed, episode_id)
        self._slip_rng = stream(root_seed, Purpose.SLIP, episode_id) if drops else None
        return self._state

    def restore(self, state: EnvState) -> None:
        """Continue from an existing state with the drop channel disabled."""
        self._state = state
        self._slip_rng = None

    def step(self, action: np.ndarray) -> tuple[EnvState, bool, Optional[str]]:
        state, contact = env_step(self.state, action, self.config, self._slip_rng)
        self._state = state
        return state, contact, terminal_reason(state, self.config)

    def replay(self, state: EnvState, actions: np.ndarray) -> EnvState:
        """Kinematic replay of recorded actions from ``state``; does not touch the episode."""
        for action in np.asarray(actions, dtype=float):
            state, _ = env_step(state, action, self.config, None)
        return state

"""Noise-conditioned chunk generator over a smooth expert plan.

A chunk is ``e(x) + eps * g(x) * P (R(x) z + mu(x))``:

- ``e(x)`` is a critically damped third-order controller plan toward the current subgoal,
  continued from the last executed actions.
- ``R(x)`` is an ``r x L`` row-orthonormal coupling whose rows drift with frozen random
  features of the context.
- ``P`` maps the ``r`` coupled components onto Legendre shapes per action dimension, so
  the deviation is smooth inside a chunk and only jumps at boundaries. Each shape is
  shifted so that repeating it every chunk leaves the expert no steady position error.
- ``g(x)`` is a context gain with an episode-level part that depends on the goal only;
  ``mu(x)`` is a context bias of magnitude ``m``.

The sampler integrates the straight-line velocity field from reshaped ``z`` to that target
with S Euler steps.
"""

from typing import Optional

import numpy as np
from numpy.polynomial import legendre
from pydantic import BaseModel, ConfigDict, Field, model_validator

from chunk_artifacts.chunking.types import ActionChunk
from chunk_artifacts.env.contexts import ContextSnapshot
from chunk_artifacts.env.testbed import EnvState
from chunk_artifacts.errors import ContractViolation
from chunk_artifacts.policy.noise import NoiseVector
from chunk_artifacts.seeding import Purpose, seed_record, stream

N_STATE_FEATURES = 9
SETTLE_CHUNKS = 100


class PolicyConfig(BaseModel):
    """Frozen generator parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    epsilon_dev: float = Field(default=0.1, ge=0, description="Deviation scale eps_dev")
    rank: int = Field(default=4, ge=1, description="Coupling rank r")
    flow_steps: int = Field(default=10, ge=1, description="Euler steps S of the sampler")
    omega: float = Field(default=1.5, gt=0, description="Expert natural frequency")
    n_features: int = Field(default=8, ge=1, description="Random context features F")
    feature_seed: int = Field(default=1234, description="Seed of the frozen random features")
    coupling_drift: float = Field(
        default=0.3, ge=0, description="How strongly context features rotate the coupling"
    )
    bias_magnitude: float = Field(default=1.5, ge=0, description="Norm of the context bias mu")
    gain_spread: float = Field(default=0.3, ge=0, description="Log-range of the context gain")
    scene_gain_spread: float = Field(
        default=0.15, ge=0, description="Log-range of the per-episode gain set by the goal"
    )
    scene_frequency: float = Field(
        default=8.0, ge=0, description="Spatial frequency of the goal-dependent gain"
    )
    slope_amplitude: float = Field(
        default=0.5, ge=0, description="Peak of the second and higher shapes relative to the first"
    )
    nonlinear: bool = Field(default=False, description="Squash the deviation through tanh")
    nonlinear_scale: float = Field(default=0.5, gt=0, description="tanh saturation scale")
    horizon: int = Field(default=10, ge=2, description="Chunk length H")
    action_dim: int = Field(default=2, ge=1, description="Action dimension D")

    @model_validator(mode="after")
    def _rank_fits(self) -> "PolicyConfig":
        if self.rank > self.horizon * self.action_dim:
            raise ValueError("rank must not exceed H x D")
        return self

    @property
    def latent_dim(self) -> int:
        return self.horizon * self.action_dim


def state_features(state: EnvState) -> np.ndarray:
    """Low-dimensional description of a context used by the coupling features."""
    return np.concatenate(
        [
            state.position,
            state.velocity,
            state.object_position - state.position,
            state.goal - state.position,
            [1.0 if state.carrying else 0.0],
        ]
    )


def controller_plan(
    position: np.ndarray,
    subgoal: np.ndarray,
    velocity: np.ndarray,
    acceleration: np.ndarray,
    omega: float,
    dt: float,
    horizon: int,
) -> np.ndarray:
    """Velocities of ``q''' = w^3 (g - q) - 3 w^2 q' - 3 w q''`` over ``horizon`` steps."""
    q = np.array(position, dtype=float)
    u = np.array(velocity, dtype=float)
    acc = np.array(acceleration, dtype=float)
    plan = np.empty((horizon,) + q.shape)
    for h in range(horizon):
        jerk = omega**3 * (subgoal - q) - 3.0 * omega**2 * u - 3.0 * omega * acc
        acc = acc + dt * jerk
        u = u + dt * acc
        q = q + dt * u
        plan[h] = u
    return plan


def expert_plan(state: EnvState, config: PolicyConfig, dt: float) -> np.ndarray:
    """
    Smooth H-step velocity plan toward the object, or the goal while carrying.

    Starts from the current position, last commanded velocity and last commanded
    acceleration.
    """
    subgoal = state.goal if state.carrying else state.object_position
    velocity = state.prev_actions[1]
    if state.step >= 2:
        acceleration = (state.prev_actions[1] - state.prev_actions[0]) / dt
    else:
        acceleration = np.zeros_like(velocity)
    return controller_plan(state.position, subgoal, velocity, acceleration, config.omega, dt, config.horizon)


def steady_offset(profile: np.ndarray, config: PolicyConfig, dt: float, stride: int) -> float:
    """
    Mean position error the chunked expert settles at when every chunk adds ``profile`` to
    its first ``stride`` velocities. Linear in ``profile``.
    """
    position = np.zeros(1)
    goal = np.zeros(1)
    last = np.zeros((2, 1))
    errors = np.empty(stride)
    for _ in range(SETTLE_CHUNKS):
        plan = controller_plan(position, goal, last[1], (last[1] - last[0]) / dt, config.omega, dt, stride)
        for h in range(stride):
            action = plan[h] + profile[h]
            position = position + dt * action
            errors[h] = position[0]
            last = np.stack([last[1], action])
    return float(errors.mean())


def shape_matrix(config: PolicyConfig, dt: float = 0.1, stride: int = 5) -> np.ndarray:
    """``(H*D) x r`` map from coupled components to per-action shapes.

    Column ``j`` drives action dimension ``j % D`` with the Legendre polynomial of order
    ``j // D + 1`` over the chunk, plus the constant that cancels its steady offset at
    replanning stride ``stride``. The first order peaks at 1 over the executed steps,
    higher orders at ``slope_amplitude``.

    Raises:
        ContractViolation: If the stride lies outside ``[1, H]``
    """
    horizon, dim = config.horizon, config.action_dim
    if not 1 <= stride <= horizon:
        raise ContractViolation(f"stride {stride} outside [1, {horizon}]")
    tau = np.linspace(-1.0, 1.0, horizon)
    constant_offset = steady_offset(np.ones(horizon), config, dt, stride)

    profiles: dict[int, np.ndarray] = {}
    shapes = np.zeros((horizon, dim, config.rank))
    for j in range(config.rank):
        family = j // dim
        if family not in profiles:
            coefficients = np.zeros(family + 2)
            coefficients[-1] = 1.0
            raw = legendre.legval(tau, coefficients)
            balanced = raw - steady_offset(raw, config, dt, stride) / constant_offset
            peak = 1.0 if family == 0 else config.slope_amplitude
            profiles[family] = peak * balanced / np.abs(balanced[:stride]).max()
        shapes[:, j % dim, j] = profiles[family]
    return shapes.reshape(horizon * dim, config.rank)


def integrate_flow(x0: np.ndarray, target: np.ndarray, steps: int) -> np.ndarray:
    """Euler integration of the straight-line field ``v = (target - x) / (1 - t)``."""
    x = np.array(x0, dtype=float)
    for i in range(steps):
        # x + dt * (target - x) / (1 - t) with dt = 1/S, t = i/S, as a convex update
        weight = 1.0 / (steps - i)
        x = (1.0 - weight) * x + weight * target
    return x


class ChunkPolicy:
    """Deterministic generator ``(context, z) -> ActionChunk`` with frozen random weights.

    ``stride`` is the replanning stride the deviation shapes are balanced for; rollouts at
    another stride still run but the deviation then leaves a small steady offset.
    """

    def __init__(self, config: Optional[PolicyConfig] = None, dt: float = 0.1, stride: Optional[int] = None):
        self.config = config or PolicyConfig()
        cfg = self.config
        self.dt = dt
        self.stride = stride if stride is not None else min(5, cfg.horizon)
        rng = stream(cfg.feature_seed, Purpose.FEATURES)

        latent = cfg.latent_dim
        self._w_feat = rng.standard_normal((cfg.n_features, N_STATE_FEATURES)) / np.sqrt(N_STATE_FEATURES)
        self._b_feat = rng.standard_normal(cfg.n_features)
        self._r0 = rng.standard_normal((cfg.rank, latent))
        self._r_feat = rng.standard_normal((cfg.n_features, cfg.rank, latent))
        self._w_gain = rng.standard_normal(cfg.n_features) / np.sqrt(cfg.n_features)
        self._m_bias = rng.standard_normal((cfg.rank, cfg.n_features)) / np.sqrt(cfg.n_features)
        mu0 = np.zeros(cfg.rank)
        n_first = min(cfg.rank, cfg.action_dim)
        mu0[:n_first] = rng.standard_normal(n_first)
        self._mu0 = mu0 / np.linalg.norm(mu0)
        self._w_scene = cfg.scene_frequency * rng.standard_normal(cfg.action_dim)
        self._b_scene = rng.uniform(0.0, 2.0 * np.pi)
        self._shape = shape_matrix(cfg, dt, self.stride)

    @property
    def latent_dim(self) -> int:
        return self.config.latent_dim

    def features(self, state: EnvState) -> np.ndarray:
        return np.tanh(self._w_feat @ state_features(state) + self._b_feat)

    def rotation(self, state: EnvState) -> np.ndarray:
        """Row-orthonormal ``r x L`` coupling at a context."""
        phi = self.features(state)
        mixed = self._r0 + self.config.coupling_drift * np.tensordot(phi, self._r_feat, axes=1) / np.sqrt(
            self.config.n_features
        )
        left, _, right_t = np.linalg.svd(mixed, full_matrices=False)
        return left @ right_t

    def gain(self, state: EnvState) -> float:
        """Context gain; the goal term is constant over an episode."""
        cfg = self.config
        context_term = cfg.gain_spread * np.tanh(self._w_gain @ self.features(state))
        scene_term = cfg.scene_gain_spread * np.sin(self._w_scene @ state.goal + self._b_scene)
        return float(np.exp(context_term + scene_term))

    def bias(self, state: EnvState) -> np.ndarray:
        direction = self._mu0 + 0.3 * self._m_bias @ self.features(state)
        return self.config.bias_magnitude * direction / np.linalg.norm(direction)

    def coupling_matrix(self, state: EnvState) -> np.ndarray:
        """``C(x) = g(x) P R(x)``, the ``L x L`` linear map from z to the deviation per eps."""
        return self.gain(state) * self._shape @ self.rotation(state)

    def deviation(self, state: EnvState, z: np.ndarray) -> np.ndarray:
        cfg = self.config
        if cfg.epsilon_dev == 0.0:
            return np.zeros((cfg.horizon, cfg.action_dim))
        coupled = self.rotation(state) @ z + self.bias(state)
        delta = cfg.epsilon_dev * self.gain(state) * (self._shape @ coupled)
        return delta.reshape(cfg.horizon, cfg.action_dim)

    def chunk_actions(self, state: EnvState, z: np.ndarray) -> np.ndarray:
        """Raw ``H x D`` action matrix for a latent array."""
        cfg = self.config
        z = np.asarray(z, dtype=float)
        if z.shape != (cfg.latent_dim,):
            raise ContractViolation(f"noise must have length {cfg.latent_dim}, got {z.shape}")
        if state.position.shape[0] != cfg.action_dim:
            raise ContractViolation("context dimension does not match the policy action dimension")

        plan = expert_plan(state, cfg, self.dt)
        delta = self.deviation(state, z)
        if cfg.nonlinear:
            delta = cfg.nonlinear_scale * np.tanh(delta / cfg.nonlinear_scale)
        target = plan + delta
        return integrate_flow(z.reshape(cfg.horizon, cfg.action_dim), target, cfg.flow_steps)

    def generate_chunk(
        self, context: ContextSnapshot, z: NoiseVector, chunk_index: int = 0
    ) -> ActionChunk:
        """
        Generate an action chunk at a frozen context.

        Raises:
            ContractViolation: On noise length or action dimension mismatch
        """
        actions = self.chunk_actions(context.state, z.values)
        return ActionChunk(
            actions=actions,
            chunk_index=chunk_index,
            context_id=context.context_id,
            noise_id=z.noise_id,
        )

    def sample_noise(self, root_seed: int, episode_id: int, chunk_index: int) -> NoiseVector:
        """Noise for chunk ``chunk_index`` of episode ``episode_id``."""
        rng = stream(root_seed, Purpose.CHUNK_NOISE, episode_id, chunk_index)
        return NoiseVector(
            base=rng.standard_normal(self.latent_dim),
            noise_id=f"e{episode_id}c{chunk_index}",
            seed_record=seed_record(root_seed, Purpose.CHUNK_NOISE, episode_id, chunk_index),
        )

    def draw_noise(self, rng: np.random.Generator, noise_id: str) -> NoiseVector:
        """Noise from an explicit stream."""
        return NoiseVector(base=rng.standard_normal(self.latent_dim), noise_id=noise_id)

    def zero_noise(self, noise_id: str = "zero") -> NoiseVector:
        return NoiseVector(base=np.zeros(self.latent_dim), noise_id=noise_id)

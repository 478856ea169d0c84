"""First-boundary probes: stitch two chunks at a frozen context and measure the seam."""

from typing import Optional

import numpy as np

from chunk_artifacts.chunking.metrics import (
    boundary_transition_jerk,
    jerk_contrast,
    phase_profile,
)
from chunk_artifacts.chunking.types import ArtifactSummary, ChunkRecord, PhaseProfile, RolloutTrace
from chunk_artifacts.env.contexts import ContextSnapshot
from chunk_artifacts.env.testbed import EnvConfig, EnvState, env_step, sanitize_action, terminal_reason
from chunk_artifacts.errors import ContractViolation
from chunk_artifacts.policy.generator import ChunkPolicy
from chunk_artifacts.policy.noise import NoiseVector


def invalid_summary(stride: int) -> ArtifactSummary:
    """Placeholder for a probe whose prefix ended the episode."""
    return ArtifactSummary(
        jerk_contrast=float("nan"),
        boundary_transition_jerk=float("nan"),
        phase_profile=PhaseProfile(np.full(stride, np.nan), np.zeros(stride, dtype=int)),
        window=(0, 0),
        n_timesteps=0,
        control="probe",
        valid=False,
    )


class BoundaryProbe:
    """
    Executed prefix of chunk ``c0 = pi(x, z0)`` cached for probing many next-chunk noises.

    The prefix runs K steps from the context with the drop channel disabled. If the episode
    terminates during the prefix the probe is invalid and every evaluation returns an
    invalid summary.
    """

    def __init__(
        self,
        context: ContextSnapshot,
        z0: NoiseVector,
        policy: ChunkPolicy,
        env_config: EnvConfig,
        stride: int,
    ):
        if stride < 4 or stride > policy.config.horizon:
            raise ContractViolation(f"probe needs 4 <= K <= H, got K={stride}")
        self.context = context
        self.policy = policy
        self.env_config = env_config
        self.stride = stride

        chunk = policy.generate_chunk(context, z0, chunk_index=0)
        state = context.state
        executed = []
        self.valid = True
        for k in range(stride):
            action = sanitize_action(chunk.actions[k], env_config)
            state, _ = env_step(state, action, env_config, None)
            executed.append(action)
            if terminal_reason(state, env_config) is not None:
                self.valid = False
                break
        self.prefix = np.asarray(executed)
        self.next_state: EnvState = state
        self.z0_id = z0.noise_id

    def stitched_actions(self, z1_values: np.ndarray) -> np.ndarray:
        """Executed 2K-step window: the prefix followed by the head of the next chunk."""
        if not self.valid:
            raise ContractViolation("probe prefix terminated the episode")
        head = self.policy.chunk_actions(self.next_state, z1_values)[: self.stride]
        head = np.stack([sanitize_action(a, self.env_config) for a in head])
        return np.vstack([self.prefix, head])

    def summarize(self, actions: np.ndarray, noise_ids: tuple[str, str] = ("z0", "z1")) -> ArtifactSummary:
        """BTJ at the stitch and the boundary-interior contrast over the stitched window."""
        stride = self.stride
        trace = RolloutTrace(
            executed=actions,
            stride=stride,
            horizon=self.policy.config.horizon,
            chunk_records=(
                ChunkRecord(0, self.context.context_id, noise_ids[0]),
                ChunkRecord(1, f"{self.context.context_id}+1", noise_ids[1]),
            ),
            step_chunks=np.repeat([0, 1], stride),
            contact_mask=None,
            outcome=False,
            episode_id=self.context.episode_id,
            source="probe",
        )
        profile = phase_profile(trace)
        return ArtifactSummary(
            jerk_contrast=jerk_contrast(profile),
            boundary_transition_jerk=boundary_transition_jerk(trace, stride),
            phase_profile=profile,
            window=(2, 2 * stride),
            n_timesteps=2 * stride - 2,
            control="probe",
        )

    def evaluate(self, z1: NoiseVector) -> ArtifactSummary:
        if not self.valid:
            return invalid_summary(self.stride)
        return self.summarize(self.stitched_actions(z1.values), (self.z0_id, z1.noise_id))

    def evaluate_values(self, z1_values: np.ndarray) -> ArtifactSummary:
        if not self.valid:
            return invalid_summary(self.stride)
        return self.summarize(self.stitched_actions(z1_values))


def first_boundary_probe(
    context: ContextSnapshot,
    z0: NoiseVector,
    z1: NoiseVector,
    policy: ChunkPolicy,
    env_config: EnvConfig,
    stride: int = 5,
    probe: Optional[BoundaryProbe] = None,
) -> ArtifactSummary:
    """
    Stitch ``c0 = pi(x, z0)`` and ``c1 = pi(x', z1)`` at the first boundary.

    Returns a summary with ``valid=False`` when the prefix terminates the episode.
    """
    probe = probe or BoundaryProbe(context, z0, policy, env_config, stride)
    return probe.evaluate(z1)

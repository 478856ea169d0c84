"""Shared fixtures: small configs, a policy and hand-made traces."""

from collections.abc import Callable
from pathlib import Path
from typing import Optional

import numpy as np
import pytest

from chunk_artifacts.chunking.types import ChunkRecord, RolloutTrace, chunk_of_step
from chunk_artifacts.env.testbed import EnvConfig
from chunk_artifacts.policy.generator import ChunkPolicy, PolicyConfig

FIXTURES = Path(__file__).parent / "fixtures"

TraceFactory = Callable[..., RolloutTrace]


def build_trace(
    actions,
    stride: int = 5,
    horizon: int = 10,
    contact: Optional[list[bool]] = None,
    outcome: bool = False,
    episode_id: int = 0,
    phase_offset: int = 0,
    source: str = "external",
) -> RolloutTrace:
    """Trace over ``actions`` (T x D, or length T for D = 1) with one record per chunk."""
    executed = np.asarray(actions, dtype=float)
    if executed.ndim == 1:
        executed = executed[:, np.newaxis]
    steps = chunk_of_step(np.arange(executed.shape[0]), stride, phase_offset)
    records = tuple(ChunkRecord(int(c), f"ctx{c}", f"n{c}") for c in np.unique(steps))
    return RolloutTrace(
        executed=executed,
        stride=stride,
        horizon=horizon,
        chunk_records=records,
        step_chunks=steps,
        contact_mask=None if contact is None else np.asarray(contact, dtype=bool),
        outcome=outcome,
        episode_id=episode_id,
        phase_offset=phase_offset,
        source=source,
    )


def boundary_pulse(n_steps: int, stride: int = 5, height: float = 1.0) -> np.ndarray:
    """Staircase rising by ``height`` at every boundary: jerk ``height`` at phases 0 and 1 only."""
    return height * (np.arange(n_steps) // stride).astype(float)


@pytest.fixture
def make_trace() -> TraceFactory:
    return build_trace


@pytest.fixture
def policy_config() -> PolicyConfig:
    return PolicyConfig()


@pytest.fixture
def policy(policy_config: PolicyConfig) -> ChunkPolicy:
    return ChunkPolicy(policy_config, dt=0.1)


@pytest.fixture
def env_config() -> EnvConfig:
    return EnvConfig.from_preset("headroom")


@pytest.fixture
def minimal_trace_path() -> Path:
    return FIXTURES / "minimal_trace.jsonl"

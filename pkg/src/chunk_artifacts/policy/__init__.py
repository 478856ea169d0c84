"""Noise-conditioned chunk generator, steering and first-boundary probes."""

from chunk_artifacts.policy.generator import ChunkPolicy, PolicyConfig, expert_plan
from chunk_artifacts.policy.noise import (
    NoiseVector,
    SteeringDirection,
    random_unit_directions,
    steer,
)
from chunk_artifacts.policy.probe import BoundaryProbe, first_boundary_probe

__all__ = [
    "BoundaryProbe",
    "ChunkPolicy",
    "NoiseVector",
    "PolicyConfig",
    "SteeringDirection",
    "expert_plan",
    "first_boundary_probe",
    "random_unit_directions",
    "steer",
]

"""Chunked trajectory types and boundary artifact metrics."""

from chunk_artifacts.chunking.metrics import (
    Control,
    boundary_timesteps,
    boundary_transition_jerk,
    episode_contrast,
    jerk_contrast,
    jerk_series,
    matched_horizon_truncate,
    mean_jerk_time_course,
    phase_profile,
)
from chunk_artifacts.chunking.types import (
    ActionChunk,
    ArtifactSummary,
    ChunkRecord,
    PhaseProfile,
    RolloutTrace,
    TimeCourse,
)

__all__ = [
    "ActionChunk",
    "ArtifactSummary",
    "ChunkRecord",
    "Control",
    "PhaseProfile",
    "RolloutTrace",
    "TimeCourse",
    "boundary_timesteps",
    "boundary_transition_jerk",
    "episode_contrast",
    "jerk_contrast",
    "jerk_series",
    "matched_horizon_truncate",
    "mean_jerk_time_course",
    "phase_profile",
]

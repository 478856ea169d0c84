"""Measure and steer chunk-boundary artifacts in action-chunked generative policies."""

__version__ = "0.1.0"

from chunk_artifacts.config import RunConfig
from chunk_artifacts.errors import (
    CapabilityError,
    ChunkArtifactError,
    ConfigError,
    ContractViolation,
    RunnerError,
    TraceParseError,
)

__all__ = [
    "CapabilityError",
    "ChunkArtifactError",
    "ConfigError",
    "ContractViolation",
    "RunConfig",
    "RunnerError",
    "TraceParseError",
    "__version__",
]

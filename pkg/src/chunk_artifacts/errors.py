"""Exception hierarchy shared by every chunk-artifacts module."""


class ChunkArtifactError(Exception):
    """Base class for all package errors."""


class ContractViolation(ChunkArtifactError, ValueError):
    """A documented precondition of an operation does not hold."""


class EmptySeriesError(ChunkArtifactError):
    """A jerk series was requested over a window with no valid timesteps."""


class UndefinedContrastError(ChunkArtifactError):
    """A phase used by the boundary-interior contrast has no samples."""


class UndefinedSummaryError(ChunkArtifactError):
    """A control window selected no timesteps."""


class UndefinedCorrelationError(ChunkArtifactError):
    """Correlation requested on inputs with zero variance."""


class CapabilityError(ChunkArtifactError):
    """The data lacks a field the requested analysis depends on."""


class TraceParseError(ChunkArtifactError):
    """A trace or report file could not be parsed."""

    def __init__(self, path: object, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class ConfigError(ChunkArtifactError):
    """A run configuration is invalid; the message names the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class RunnerError(ChunkArtifactError):
    """An experiment runner could not produce a result."""

"""Immutable domain types for chunked action trajectories."""

from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from chunk_artifacts.errors import ContractViolation


def frozen_array(values: Any, dtype: Any = float, ndim: Optional[int] = None) -> np.ndarray:
    """Copy ``values`` into a read-only numpy array."""
    array = np.array(values, dtype=dtype, copy=True)
    if ndim is not None and array.ndim != ndim:
        raise ContractViolation(f"expected a {ndim}-d array, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ActionChunk:
    """H consecutive actions generated in one sampler call."""

    actions: np.ndarray
    chunk_index: int
    context_id: str
    noise_id: str

    def __post_init__(self) -> None:
        actions = frozen_array(self.actions, ndim=2)
        if actions.shape[0] < 2 or actions.shape[1] < 1:
            raise ContractViolation(f"chunk must be H>=2 by D>=1, got {actions.shape}")
        if not np.all(np.isfinite(actions)):
            raise ContractViolation("chunk contains non-finite actions")
        if self.chunk_index < 0:
            raise ContractViolation("chunk_index must be >= 0")
        object.__setattr__(self, "actions", actions)

    @property
    def horizon(self) -> int:
        return int(self.actions.shape[0])

    @property
    def action_dim(self) -> int:
        return int(self.actions.shape[1])


@dataclass(frozen=True)
class ChunkRecord:
    """Bookkeeping for one generated chunk inside a rollout."""

    chunk_index: int
    context_id: str
    noise_id: Optional[str] = None
    alpha: Optional[float] = None
    direction_id: Optional[str] = None

    @property
    def steered(self) -> bool:
        return self.direction_id is not None and self.alpha not in (None, 0.0)


@dataclass(frozen=True, eq=False)
class RolloutTrace:
    """Executed action trajectory of one episode with chunk and contact bookkeeping.

    Step ``t`` has phase ``(t - phase_offset) mod stride``; phase 0 is the first executed
    action of a freshly generated chunk. ``step_chunks[t]`` is the chunk index that produced
    step ``t`` and must have a matching entry in ``chunk_records``. A trace flagged invalid
    may be shorter than K, down to no steps at all.
    """

    executed: np.ndarray
    stride: int
    horizon: int
    chunk_records: tuple[ChunkRecord, ...]
    step_chunks: np.ndarray
    contact_mask: Optional[np.ndarray]
    outcome: bool
    episode_id: int
    seed_record: dict[str, Any] = field(default_factory=dict)
    phase_offset: int = 0
    terminal_reason: str = "timeout"
    valid: bool = True
    flags: tuple[str, ...] = ()
    source: str = "testbed"

    def __post_init__(self) -> None:
        executed = frozen_array(self.executed, ndim=2)
        n_steps = executed.shape[0]
        if self.stride < 1 or self.horizon < self.stride:
            raise ContractViolation(f"need 1 <= K <= H, got K={self.stride} H={self.horizon}")
        if not 0 <= self.phase_offset < self.stride:
            raise ContractViolation(f"phase_offset must lie in [0, {self.stride})")
        if self.valid and n_steps < self.stride:
            raise ContractViolation(f"trace of length {n_steps} is shorter than K={self.stride}")
        if not np.all(np.isfinite(executed)):
            raise ContractViolation("trace contains non-finite actions")

        step_chunks = frozen_array(self.step_chunks, dtype=np.int64, ndim=1)
        if step_chunks.shape[0] != n_steps:
            raise ContractViolation("step_chunks length must equal T")
        expected = chunk_of_step(np.arange(n_steps), self.stride, self.phase_offset)
        if not np.array_equal(step_chunks, expected):
            raise ContractViolation("steps do not map onto chunks at the boundary grid")
        recorded = {record.chunk_index for record in self.chunk_records}
        missing = set(step_chunks.tolist()) - recorded
        if missing:
            raise ContractViolation(f"no chunk record for chunk(s) {sorted(missing)}")

        contact = self.contact_mask
        if contact is not None:
            contact = frozen_array(contact, dtype=bool, ndim=1)
            if contact.shape[0] != n_steps:
                raise ContractViolation("contact_mask length must equal T")

        object.__setattr__(self, "executed", executed)
        object.__setattr__(self, "step_chunks", step_chunks)
        object.__setattr__(self, "contact_mask", contact)
        object.__setattr__(self, "chunk_records", tuple(self.chunk_records))
        object.__setattr__(self, "flags", tuple(self.flags))

    @property
    def length(self) -> int:
        return int(self.executed.shape[0])

    @property
    def action_dim(self) -> int:
        return int(self.executed.shape[1])

    @property
    def phases(self) -> np.ndarray:
        return (np.arange(self.length) - self.phase_offset) % self.stride

    def record_for_step(self, t: int) -> ChunkRecord:
        index = int(self.step_chunks[t])
        for record in self.chunk_records:
            if record.chunk_index == index:
                return record
        raise ContractViolation(f"no chunk record for step {t}")

    def truncate(self, length: int) -> "RolloutTrace":
        """Keep the first ``length`` steps, cutting records and mask consistently."""
        if not 1 <= length <= self.length:
            raise ContractViolation(f"cannot truncate a length-{self.length} trace to {length}")
        if length == self.length:
            return self
        kept = set(self.step_chunks[:length].tolist())
        return replace(
            self,
            executed=self.executed[:length],
            step_chunks=self.step_chunks[:length],
            contact_mask=None if self.contact_mask is None else self.contact_mask[:length],
            chunk_records=tuple(r for r in self.chunk_records if r.chunk_index in kept),
            flags=tuple(dict.fromkeys((*self.flags, "truncated"))),
        )


def chunk_of_step(t: np.ndarray, stride: int, phase_offset: int = 0) -> np.ndarray:
    """Chunk index producing each step; a nonzero offset makes chunk 0 a partial chunk."""
    t = np.asarray(t, dtype=np.int64)
    return (t - phase_offset) // stride + (1 if phase_offset else 0)


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    """Mean jerk per phase of the replanning cycle. Absent phases hold NaN and count 0."""

    mean_jerk_by_phase: np.ndarray
    counts_by_phase: np.ndarray

    def __post_init__(self) -> None:
        means = frozen_array(self.mean_jerk_by_phase, ndim=1)
        counts = frozen_array(self.counts_by_phase, dtype=np.int64, ndim=1)
        if means.shape != counts.shape:
            raise ContractViolation("means and counts must have the same length")
        if np.any(counts < 0):
            raise ContractViolation("phase counts must be nonnegative")
        if not np.all(np.isfinite(means[counts > 0])):
            raise ContractViolation("phase means must be finite where count > 0")
        object.__setattr__(self, "mean_jerk_by_phase", means)
        object.__setattr__(self, "counts_by_phase", counts)

    @property
    def stride(self) -> int:
        return int(self.counts_by_phase.shape[0])

    def is_present(self, phase: int) -> bool:
        return bool(self.counts_by_phase[phase] > 0)


@dataclass(frozen=True, eq=False)
class ArtifactSummary:
    """Scalar boundary metrics over one window of a trace or probe."""

    jerk_contrast: float
    boundary_transition_jerk: float
    phase_profile: PhaseProfile
    window: tuple[int, int]
    n_timesteps: int = 0
    control: str = "all"
    valid: bool = True


@dataclass(frozen=True, eq=False)
class TimeCourse:
    """Per-timestep mean jerk across equal-length traces."""

    timesteps: np.ndarray
    mean_jerk: np.ndarray
    n_traces: int
    boundary_timesteps: np.ndarray

"""Latent noise vectors and steering directions."""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from chunk_artifacts.chunking.types import frozen_array
from chunk_artifacts.errors import ContractViolation

UNIT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SteeringDirection:
    """Unit direction in noise space, oriented so that ``+alpha`` increases the artifact.

    ``reducing_sign`` is the sign of alpha that lowers the artifact and is always -1 for
    directions produced by the search.
    """

    direction: np.ndarray
    direction_id: str
    context_id: str = ""
    candidate_index: int = 0
    selection_score: float = 0.0
    reducing_sign: int = -1
    degenerate: bool = False
    scores: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        direction = frozen_array(self.direction, ndim=1)
        if abs(float(np.linalg.norm(direction)) - 1.0) > UNIT_TOL:
            raise ContractViolation("steering direction must have unit L2 norm")
        if self.reducing_sign not in (-1, 1):
            raise ContractViolation("reducing_sign must be -1 or +1")
        object.__setattr__(self, "direction", direction)

    def flipped(self) -> "SteeringDirection":
        return SteeringDirection(
            direction=-self.direction,
            direction_id=self.direction_id,
            context_id=self.context_id,
            candidate_index=self.candidate_index,
            selection_score=self.selection_score,
            reducing_sign=self.reducing_sign,
            degenerate=self.degenerate,
            scores=self.scores,
        )


@dataclass(frozen=True, eq=False)
class NoiseVector:
    """Standard-normal sampler input of length H x D.

    ``values`` is always ``base + sum(alpha_i * d_i)`` over the recorded steering offsets,
    with alphas along the same direction accumulated, so repeated steering composes exactly.
    """

    base: np.ndarray
    noise_id: str
    seed_record: dict[str, Any] = field(default_factory=dict)
    offsets: tuple[tuple[str, float, np.ndarray], ...] = ()
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        base = frozen_array(self.base, ndim=1)
        if not np.all(np.isfinite(base)):
            raise ContractViolation("noise vector contains non-finite values")
        values = base.copy()
        for _, alpha, direction in self.offsets:
            values = values + alpha * direction
        values.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return int(self.base.shape[0])

    @property
    def steering(self) -> tuple[float, str] | None:
        """Net (alpha, direction_id) of the last direction applied, if any."""
        if not self.offsets:
            return None
        direction_id, alpha, _ = self.offsets[-1]
        return alpha, direction_id


def steer(z: NoiseVector, d: SteeringDirection, alpha: float) -> NoiseVector:
    """
    Shift ``z`` by ``alpha * d`` and record the shift.

    Raises:
        ContractViolation: On length mismatch
    """
    if d.direction.shape[0] != z.length:
        raise ContractViolation(f"direction length {d.direction.shape[0]} != noise length {z.length}")
    if alpha == 0.0:
        return z

    offsets = []
    merged = False
    for direction_id, prior, vector in z.offsets:
        if direction_id == d.direction_id and np.array_equal(vector, d.direction):
            offsets.append((direction_id, prior + float(alpha), vector))
            merged = True
        else:
            offsets.append((direction_id, prior, vector))
    if not merged:
        offsets.append((d.direction_id, float(alpha), d.direction))
    offsets = [entry for entry in offsets if entry[1] != 0.0]
    return NoiseVector(base=z.base, noise_id=z.noise_id, seed_record=z.seed_record, offsets=tuple(offsets))


def random_unit_directions(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """``n`` directions uniform on the unit sphere in ``dim`` dimensions, one per row."""
    if n < 1 or dim < 1:
        raise ContractViolation("need n >= 1 directions of dimension >= 1")
    draws = rng.standard_normal((n, dim))
    norms = np.linalg.norm(draws, axis=1, keepdims=True)
    return draws / norms

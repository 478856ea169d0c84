"""Named, order-independent random streams.

Every random draw in the package comes from a ``numpy.random.Generator`` built from
``SeedSequence(entropy=root_seed, spawn_key=(purpose, *indices))``. A stream depends only on
the root seed and its key, never on how many other streams were used before it, so runs are
bit-reproducible regardless of worker count or execution order.
"""

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    """Stream namespaces. Values are part of the seed record and must never change."""

    SCENE = 1
    SLIP = 2
    CHUNK_NOISE = 3
    DIRECTIONS = 4
    NEXT_NOISE = 5
    SCAN = 6
    PERMUTATION = 7
    BOOTSTRAP = 8
    FEATURES = 9


def seed_sequence(root_seed: int, purpose: Purpose, *indices: int) -> np.random.SeedSequence:
    """Build the seed sequence for a named stream."""
    return np.random.SeedSequence(
        entropy=int(root_seed), spawn_key=(int(purpose), *(int(i) for i in indices))
    )


def stream(root_seed: int, purpose: Purpose, *indices: int) -> np.random.Generator:
    """Return a fresh generator for ``(root_seed, purpose, *indices)``."""
    return np.random.default_rng(seed_sequence(root_seed, purpose, *indices))


def seed_record(root_seed: int, purpose: Purpose, *indices: int) -> dict[str, object]:
    """Serializable provenance for a stream."""
    return {"root": int(root_seed), "purpose": purpose.name.lower(), "key": [int(i) for i in indices]}

"""Two-sample permutation test on the difference of means."""

from itertools import combinations
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import comb

from chunk_artifacts.errors import ContractViolation
from chunk_artifacts.models import PermutationResult, Sidedness
from chunk_artifacts.seeding import Purpose, stream

EXHAUSTIVE_LIMIT = 200_000
DEFAULT_N_PERM = 20_000
_BATCH = 2_000
_REL_TOL = 1e-10


def _as_group(values: ArrayLike, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float).ravel()
    if array.size == 0:
        raise ContractViolation(f"{name} is empty")
    if not np.all(np.isfinite(array)):
        raise ContractViolation(f"{name} contains non-finite values")
    return array


def _count_extreme(stats: np.ndarray, observed: float, sidedness: str, tol: float) -> int:
    if sidedness == "greater":
        return int(np.count_nonzero(stats >= observed - tol))
    return int(np.count_nonzero(np.abs(stats) >= abs(observed) - tol))


def permutation_test(
    group_a: ArrayLike,
    group_b: ArrayLike,
    n_perm: int = DEFAULT_N_PERM,
    sidedness: Sidedness = "greater",
    seed: int = 0,
    exhaustive: Optional[bool] = None,
    rng: Optional[np.random.Generator] = None,
) -> PermutationResult:
    """
    Permutation test of ``mean(b) - mean(a)`` by shuffling pooled group labels.

    Monte Carlo mode returns ``(1 + #extreme) / (n_perm + 1)``, so p is never 0.
    Exhaustive mode enumerates every assignment of labels, the observed one included,
    and returns ``#extreme / #assignments``. It engages automatically when the number of
    assignments is at most ``EXHAUSTIVE_LIMIT`` unless ``exhaustive`` is given.

    Args:
        group_a: Reference group (e.g. successful episodes)
        group_b: Comparison group (e.g. failed episodes)
        n_perm: Monte Carlo permutations
        sidedness: ``"greater"`` tests b > a, ``"two_sided"`` tests |b - a|
        seed: Root seed of the permutation stream
        exhaustive: Force (True) or forbid (False) full enumeration
        rng: Explicit generator, overrides ``seed``

    Returns:
        PermutationResult

    Raises:
        ContractViolation: On empty groups, non-finite values or n_perm < 1
    """
    a = _as_group(group_a, "group_a")
    b = _as_group(group_b, "group_b")
    if n_perm < 1:
        raise ContractViolation("n_perm must be >= 1")
    if sidedness not in ("greater", "two_sided"):
        raise ContractViolation(f"unknown sidedness '{sidedness}'")

    n_a, n_b = a.size, b.size
    pooled = np.concatenate([a, b])
    observed = float(b.mean() - a.mean())

    if np.ptp(pooled) == 0.0:
        return PermutationResult(
            observed_delta=0.0,
            p_value=1.0,
            n_permutations=n_perm,
            sidedness=sidedness,
            degenerate=True,
            n_a=n_a,
            n_b=n_b,
        )

    tol = _REL_TOL * max(1.0, float(np.max(np.abs(pooled))))
    n_assignments = int(comb(n_a + n_b, n_a, exact=True))
    if exhaustive is None:
        exhaustive = n_assignments <= EXHAUSTIVE_LIMIT

    if exhaustive:
        total = pooled.sum()
        idx = np.fromiter(
            (i for combo in combinations(range(n_a + n_b), n_a) for i in combo),
            dtype=np.int64,
            count=n_assignments * n_a,
        ).reshape(n_assignments, n_a)
        sum_a = pooled[idx].sum(axis=1)
        stats = (total - sum_a) / n_b - sum_a / n_a
        count = _count_extreme(stats, observed, sidedness, tol)
        return PermutationResult(
            observed_delta=observed,
            p_value=count / n_assignments,
            n_permutations=n_assignments,
            sidedness=sidedness,
            exact=True,
            n_a=n_a,
            n_b=n_b,
        )

    rng = rng if rng is not None else stream(seed, Purpose.PERMUTATION)
    count = 0
    for start in range(0, n_perm, _BATCH):
        rows = min(_BATCH, n_perm - start)
        shuffled = rng.permuted(np.tile(pooled, (rows, 1)), axis=1)
        stats = shuffled[:, n_a:].mean(axis=1) - shuffled[:, :n_a].mean(axis=1)
        count += _count_extreme(stats, observed, sidedness, tol)

    return PermutationResult(
        observed_delta=observed,
        p_value=(1 + count) / (n_perm + 1),
        n_permutations=n_perm,
        sidedness=sidedness,
        n_a=n_a,
        n_b=n_b,
    )

"""Bootstrap percentile and Wilson score confidence intervals."""

from collections.abc import Callable
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.stats import norm

from chunk_artifacts.errors import ContractViolation
from chunk_artifacts.models import IntervalEstimate
from chunk_artifacts.seeding import Purpose, stream

DEFAULT_N_BOOT = 10_000
DEFAULT_LEVEL = 0.95
_BATCH_ROWS = 1_000

Statistic = Callable[..., np.ndarray]


def _mean(values: np.ndarray, axis: int = -1) -> np.ndarray:
    return np.mean(values, axis=axis)


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise ContractViolation(f"confidence level must lie in (0, 1), got {level}")


def bootstrap_ci(
    samples: ArrayLike,
    n_boot: int = DEFAULT_N_BOOT,
    level: float = DEFAULT_LEVEL,
    statistic: Optional[Statistic] = None,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> IntervalEstimate:
    """
    Percentile bootstrap interval of a statistic (the mean by default).

    ``statistic`` is called as ``statistic(values, axis=-1)`` on a 2-d batch of resamples
    and must reduce the last axis.

    Raises:
        ContractViolation: On empty or non-finite samples, n_boot < 100 or a bad level
    """
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise ContractViolation("bootstrap needs at least one sample")
    if not np.all(np.isfinite(values)):
        raise ContractViolation("bootstrap samples must be finite")
    if n_boot < 100:
        raise ContractViolation("n_boot must be >= 100")
    _check_level(level)

    statistic = statistic or _mean
    point = float(statistic(values[np.newaxis, :], axis=-1)[0])

    if values.size == 1 or np.ptp(values) == 0.0:
        return IntervalEstimate(
            point=point,
            lo=point,
            hi=point,
            level=level,
            method="bootstrap_percentile",
            degenerate=True,
        )

    rng = rng if rng is not None else stream(seed, Purpose.BOOTSTRAP)
    replicates = np.empty(n_boot)
    for start in range(0, n_boot, _BATCH_ROWS):
        rows = min(_BATCH_ROWS, n_boot - start)
        idx = rng.integers(0, values.size, size=(rows, values.size))
        replicates[start : start + rows] = statistic(values[idx], axis=-1)

    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(replicates, [tail, 100.0 - tail])
    return IntervalEstimate(
        point=point,
        lo=float(lo),
        hi=float(hi),
        level=level,
        method="bootstrap_percentile",
    )


def wilson_ci(successes: int, n: int, level: float = DEFAULT_LEVEL) -> IntervalEstimate:
    """
    Wilson score interval for a binomial proportion.

    Raises:
        ContractViolation: If n < 1 or successes is outside [0, n]
    """
    if n < 1:
        raise ContractViolation("wilson interval needs n >= 1")
    if not 0 <= successes <= n:
        raise ContractViolation(f"successes must lie in [0, {n}], got {successes}")
    _check_level(level)

    z = float(norm.ppf(1.0 - (1.0 - level) / 2.0))
    p_hat = successes / n
    denominator = 1.0 + z * z / n
    center = (p_hat + z * z / (2.0 * n)) / denominator
    margin = (z / denominator) * np.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n))

    lo = 0.0 if successes == 0 else float(np.clip(center - margin, 0.0, p_hat))
    hi = 1.0 if successes == n else float(np.clip(center + margin, p_hat, 1.0))
    return IntervalEstimate(point=p_hat, lo=lo, hi=hi, level=level, method="wilson")

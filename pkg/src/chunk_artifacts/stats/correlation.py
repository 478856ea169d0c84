"""Product-moment correlation."""

import numpy as np
from numpy.typing import ArrayLike
from scipy.stats import pearsonr

from chunk_artifacts.errors import ContractViolation, UndefinedCorrelationError


def pearson_r(xs: ArrayLike, ys: ArrayLike) -> float:
    """
    Pearson correlation of two equal-length series.

    Raises:
        ContractViolation: On length mismatch or fewer than 3 points
        UndefinedCorrelationError: If either series has zero variance
    """
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise ContractViolation(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise ContractViolation("correlation needs at least 3 points")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant series")
    r = pearsonr(x, y)[0]
    return float(np.clip(r, -1.0, 1.0))

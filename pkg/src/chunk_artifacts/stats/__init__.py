"""Permutation tests, confidence intervals and correlation."""

from chunk_artifacts.stats.correlation import pearson_r
from chunk_artifacts.stats.groups import build_group_report
from chunk_artifacts.stats.intervals import bootstrap_ci, wilson_ci
from chunk_artifacts.stats.permutation import EXHAUSTIVE_LIMIT, permutation_test

__all__ = [
    "EXHAUSTIVE_LIMIT",
    "bootstrap_ci",
    "build_group_report",
    "pearson_r",
    "permutation_test",
    "wilson_ci",
]

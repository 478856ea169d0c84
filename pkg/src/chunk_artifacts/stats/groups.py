"""Per-arm descriptive statistics."""

import zlib
from collections.abc import Sequence
from typing import Optional

import numpy as np

from chunk_artifacts.errors import ContractViolation
from chunk_artifacts.models import GroupReport
from chunk_artifacts.seeding import Purpose, stream
from chunk_artifacts.stats.intervals import DEFAULT_LEVEL, DEFAULT_N_BOOT, bootstrap_ci, wilson_ci


def arm_key(arm: str) -> int:
    """Stable integer key for an arm label."""
    return zlib.crc32(arm.encode("utf-8"))


def build_group_report(
    arm: str,
    episode_ids: Sequence[int],
    successes: Sequence[bool],
    contrasts: Sequence[Optional[float]],
    n_boot: int = DEFAULT_N_BOOT,
    level: float = DEFAULT_LEVEL,
    seed: int = 0,
    regimes: Sequence[str] = (),
    flags: Sequence[str] = (),
) -> GroupReport:
    """
    Build a GroupReport from per-episode values.

    Episodes are ordered by id before any statistic is computed, so the report depends only
    on the set of episodes, not on the order they finished in. Episodes whose contrast is
    undefined (``None``) are dropped and counted in ``n_excluded``.

    Raises:
        ContractViolation: On length mismatch or duplicate episode ids
    """
    if not len(episode_ids) == len(successes) == len(contrasts):
        raise ContractViolation("episode_ids, successes and contrasts must align")
    if len(set(episode_ids)) != len(episode_ids):
        raise ContractViolation(f"duplicate episode ids in arm '{arm}'")

    rows = sorted(zip(episode_ids, successes, contrasts), key=lambda row: row[0])
    kept = [row for row in rows if row[2] is not None and np.isfinite(row[2])]
    n = len(kept)

    ids = [int(row[0]) for row in kept]
    wins = [bool(row[1]) for row in kept]
    values = [float(row[2]) for row in kept]  # type: ignore[arg-type]

    success_rate = wilson_ci(sum(wins), n, level) if n else None
    contrast_mean = (
        bootstrap_ci(
            values,
            n_boot=n_boot,
            level=level,
            rng=stream(seed, Purpose.BOOTSTRAP, arm_key(arm)),
        )
        if n
        else None
    )

    report_flags = list(flags)
    if n == 0:
        report_flags.append("empty_arm")
    return GroupReport(
        arm=arm,
        n=n,
        success_rate=success_rate,
        contrast_mean=contrast_mean,
        episode_ids=ids,
        successes=wins,
        contrasts=values,
        n_excluded=len(rows) - n,
        regimes=sorted(set(regimes)),
        flags=report_flags,
    )

"""Ordered fan-out of independent work items across worker processes."""

import multiprocessing as mp
from collections.abc import Callable, Sequence
from functools import lru_cache
from typing import Optional, TypeVar

from tqdm import tqdm

from chunk_artifacts.chunking.types import RolloutTrace
from chunk_artifacts.env.rollout import rollout
from chunk_artifacts.env.testbed import EnvConfig
from chunk_artifacts.logging import get_logger, progress_enabled
from chunk_artifacts.policy.generator import ChunkPolicy, PolicyConfig

logger = get_logger("experiments.parallel")

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: int = 1,
    desc: str = "Working",
    show_progress: Optional[bool] = None,
) -> list[R]:
    """
    Apply ``fn`` to every item and return results in input order.

    With more than one worker the items run on a spawn-context process pool; ``fn`` and
    the items must be picklable. Output is identical for every worker count because each
    item owns its random streams.
    """
    if show_progress is None:
        show_progress = progress_enabled()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not show_progress)]

    ctx = mp.get_context("spawn")
    processes = min(workers, len(items))
    logger.debug(f"{desc}: {len(items)} items on {processes} workers")
    with ctx.Pool(processes=processes) as pool:
        return list(
            tqdm(
                pool.imap(fn, items, chunksize=1),
                total=len(items),
                desc=desc,
                disable=not show_progress,
            )
        )


@lru_cache(maxsize=8)
def policy_for(config: PolicyConfig, dt: float, stride: int) -> ChunkPolicy:
    """Per-process cache of frozen policies."""
    return ChunkPolicy(config, dt=dt, stride=stride)


def _baseline_episode(job: tuple[PolicyConfig, EnvConfig, int, int, int]) -> RolloutTrace:
    policy_config, env_config, stride, seed, episode_id = job
    return rollout(policy_for(policy_config, env_config.dt, stride), env_config, stride, seed, episode_id)


def run_baseline_episodes(
    policy_config: PolicyConfig,
    env_config: EnvConfig,
    stride: int,
    seed: int,
    episode_ids: Sequence[int],
    workers: int = 1,
    desc: str = "Rollouts",
) -> list[RolloutTrace]:
    """Unsteered rollouts of the given episodes, ordered by episode id."""
    jobs = [(policy_config, env_config, stride, seed, int(e)) for e in sorted(episode_ids)]
    return ordered_map(_baseline_episode, jobs, workers=workers, desc=desc)

"""Monte Carlo calibration of the slip threshold toward a target baseline success rate."""

from collections.abc import Sequence

import numpy as np

from chunk_artifacts.env.testbed import EnvConfig
from chunk_artifacts.errors import ContractViolation
from chunk_artifacts.experiments.parallel import run_baseline_episodes
from chunk_artifacts.logging import get_logger
from chunk_artifacts.models import CalibrationResult
from chunk_artifacts.policy.generator import PolicyConfig

logger = get_logger("experiments.calibration")


def calibrate_slip_threshold(
    target_success: float,
    thresholds: Sequence[float],
    env_config: EnvConfig,
    policy_config: PolicyConfig,
    n_episodes: int = 100,
    seed: int = 0,
    stride: int = 5,
    workers: int = 1,
) -> CalibrationResult:
    """
    Baseline success rate at each candidate slip threshold over common episode seeds.

    Returns the threshold whose rate is closest to ``target_success`` (lowest threshold on
    ties).
    """
    if not 0.0 <= target_success <= 1.0:
        raise ContractViolation("target_success must lie in [0, 1]")
    grid = sorted(float(t) for t in thresholds)
    if not grid:
        raise ContractViolation("need at least one threshold")

    rates = []
    for threshold in grid:
        cfg = env_config.model_copy(update={"slip_threshold": threshold})
        traces = run_baseline_episodes(
            policy_config, cfg, stride, seed, range(n_episodes), workers=workers, desc=f"theta={threshold:.3f}"
        )
        rate = float(np.mean([trace.outcome for trace in traces]))
        rates.append(rate)
        logger.info(f"slip_threshold={threshold:.3f}: success {rate:.3f}")

    best = int(np.argmin(np.abs(np.asarray(rates) - target_success)))
    return CalibrationResult(
        target_success=target_success,
        thresholds=grid,
        success_rates=rates,
        chosen_threshold=grid[best],
        chosen_success=rates[best],
        n_episodes=n_episodes,
    )

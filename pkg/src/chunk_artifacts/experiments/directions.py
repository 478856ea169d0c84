"""Random direction search in noise space and alpha sweeps along a direction."""

from collections.abc import Sequence
from typing import Literal, Optional

import numpy as np
from scipy.linalg import null_space

from chunk_artifacts.chunking.types import ArtifactSummary
from chunk_artifacts.env.contexts import ContextSnapshot
from chunk_artifacts.env.testbed import EnvConfig
from chunk_artifacts.errors import ContractViolation, RunnerError, UndefinedCorrelationError
from chunk_artifacts.experiments.noise_scan import build_reference_contexts
from chunk_artifacts.experiments.parallel import ordered_map, policy_for
from chunk_artifacts.logging import get_logger
from chunk_artifacts.models import DirectionRecord, DirectionReport, SweepResult
from chunk_artifacts.policy.generator import ChunkPolicy, PolicyConfig
from chunk_artifacts.policy.noise import NoiseVector, SteeringDirection, random_unit_directions, steer
from chunk_artifacts.policy.probe import BoundaryProbe
from chunk_artifacts.seeding import Purpose, stream
from chunk_artifacts.stats.correlation import pearson_r

logger = get_logger("experiments.directions")

Metric = Literal["contrast", "btj"]
DEGENERATE_SCORE = 1e-12


def artifact_value(summary: ArtifactSummary, metric: Metric) -> float:
    if metric == "btj":
        return summary.boundary_transition_jerk
    return summary.jerk_contrast


def search_direction(
    context: ContextSnapshot,
    z0: NoiseVector,
    z1: NoiseVector,
    policy: ChunkPolicy,
    env_config: EnvConfig,
    stride: int = 5,
    n_directions: int = 12,
    epsilon: float = 0.5,
    metric: Metric = "contrast",
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> SteeringDirection:
    """
    Pick the most artifact-sensitive of ``n_directions`` random unit directions.

    Each candidate ``d`` is scored by ``|A(z1 + eps d) - A(z1 - eps d)|`` where ``A`` is
    the first-boundary artifact from ``(context, z0)``. The best candidate (lowest index on
    ties) is oriented so that ``+alpha`` increases the artifact. A best score at or below
    ``DEGENERATE_SCORE`` marks the result degenerate.

    Raises:
        ContractViolation: If n_directions < 1 or epsilon <= 0
        RunnerError: If the probe prefix terminates the episode
    """
    if n_directions < 1 or epsilon <= 0:
        raise ContractViolation("need n_directions >= 1 and epsilon > 0")
    probe = BoundaryProbe(context, z0, policy, env_config, stride)
    if not probe.valid:
        raise RunnerError(f"all direction probes invalid at context {context.context_id}")

    rng = rng if rng is not None else stream(seed, Purpose.DIRECTIONS)
    candidates = random_unit_directions(rng, n_directions, policy.latent_dim)
    scores = np.empty(n_directions)
    signs = np.empty(n_directions)
    for i, d in enumerate(candidates):
        plus = artifact_value(probe.evaluate_values(z1.values + epsilon * d), metric)
        minus = artifact_value(probe.evaluate_values(z1.values - epsilon * d), metric)
        scores[i] = abs(plus - minus)
        signs[i] = 1.0 if plus >= minus else -1.0

    ranked = np.where(np.isfinite(scores), scores, -np.inf)
    best = int(np.argmax(ranked))
    if not np.isfinite(ranked[best]):
        raise RunnerError(f"all direction probes invalid at context {context.context_id}")
    best_score = float(scores[best])
    return SteeringDirection(
        direction=signs[best] * candidates[best],
        direction_id=f"{context.context_id}/d{best}",
        context_id=context.context_id,
        candidate_index=best,
        selection_score=best_score,
        reducing_sign=-1,
        degenerate=best_score <= DEGENERATE_SCORE,
        scores=tuple(float(s) for s in scores),
    )


def run_alpha_sweep(
    context: ContextSnapshot,
    z0: NoiseVector,
    z1: NoiseVector,
    direction: SteeringDirection,
    alpha_grid: Sequence[float],
    policy: ChunkPolicy,
    env_config: EnvConfig,
    stride: int = 5,
    probe: Optional[BoundaryProbe] = None,
) -> SweepResult:
    """
    First-boundary BTJ and contrast at ``steer(z1, d, alpha)`` for each alpha.

    Raises:
        ContractViolation: If the grid does not contain 0
    """
    grid = sorted(float(a) for a in alpha_grid)
    if 0.0 not in grid:
        raise ContractViolation("alpha grid must contain 0")
    probe = probe or BoundaryProbe(context, z0, policy, env_config, stride)

    alphas, btj, contrast, excluded = [], [], [], []
    for alpha in grid:
        summary = probe.evaluate(steer(z1, direction, alpha))
        if not summary.valid:
            excluded.append(alpha)
            continue
        alphas.append(alpha)
        btj.append(summary.boundary_transition_jerk)
        contrast.append(summary.jerk_contrast)

    def correlation(values: list[float]) -> Optional[float]:
        try:
            return pearson_r(alphas, values)
        except (UndefinedCorrelationError, ContractViolation):
            return None

    if excluded:
        logger.warning(f"Sweep at {context.context_id}: excluded alphas {excluded}")
    return SweepResult(
        context_id=context.context_id,
        direction_id=direction.direction_id,
        alpha_grid=alphas,
        btj=btj,
        contrast=contrast,
        r_btj=correlation(btj),
        r_contrast=correlation(contrast),
        btj_range=float(np.ptp(btj)) if btj else 0.0,
        contrast_range=float(np.ptp(contrast)) if contrast else 0.0,
        excluded_alphas=excluded,
    )


def stitch_jacobian(probe: BoundaryProbe, z1_values: np.ndarray) -> np.ndarray:
    """
    Jacobian of the flattened stitched window with respect to the next-chunk noise.

    Unit finite differences are exact for the affine generator while no action clips.
    """
    z1_values = np.asarray(z1_values, dtype=float)
    base = probe.stitched_actions(z1_values).ravel()
    columns = []
    for i in range(z1_values.shape[0]):
        shifted = z1_values.copy()
        shifted[i] += 1.0
        columns.append(probe.stitched_actions(shifted).ravel() - base)
    return np.column_stack(columns)


def artifact_gradient(probe: BoundaryProbe, z1_values: np.ndarray, metric: Metric = "btj") -> np.ndarray:
    """
    Gradient of the first-boundary artifact with respect to the next-chunk noise.

    Chains the stitch Jacobian through the second differences and their L2 norms.
    Timesteps whose second difference is exactly zero contribute no gradient.
    """
    stride = probe.stride
    actions = probe.stitched_actions(z1_values)
    dim = actions.shape[1]
    jac = stitch_jacobian(probe, z1_values).reshape(2 * stride, dim, -1)

    def jerk_gradient(t: int) -> np.ndarray:
        second = actions[t] - 2.0 * actions[t - 1] + actions[t - 2]
        norm = float(np.linalg.norm(second))
        if norm == 0.0:
            return np.zeros(jac.shape[2])
        d_second = jac[t] - 2.0 * jac[t - 1] + jac[t - 2]
        return (second / norm) @ d_second

    if metric == "btj":
        return jerk_gradient(stride)

    ts = np.arange(2, 2 * stride)
    phases = ts % stride
    counts = np.bincount(phases, minlength=stride)
    boundary, interior = (0, 1), tuple(range(2, stride))
    gradient = np.zeros(jac.shape[2])
    for t, phase in zip(ts, phases):
        if phase in boundary:
            weight = 1.0 / (len(boundary) * counts[phase])
        else:
            weight = -1.0 / (len(interior) * counts[phase])
        gradient += weight * jerk_gradient(int(t))
    return gradient


def null_direction(
    probe: BoundaryProbe, z1_values: np.ndarray, rng: np.random.Generator, direction_id: str = "null"
) -> SteeringDirection:
    """A random unit direction that leaves the stitched window unchanged."""
    basis = null_space(stitch_jacobian(probe, z1_values))
    if basis.shape[1] == 0:
        raise RunnerError("stitch Jacobian has full column rank; no null direction exists")
    vector = basis @ rng.standard_normal(basis.shape[1])
    return SteeringDirection(
        direction=vector / np.linalg.norm(vector),
        direction_id=direction_id,
        context_id=probe.context.context_id,
    )


def direction_record(direction: SteeringDirection) -> DirectionRecord:
    return DirectionRecord(
        direction_id=direction.direction_id,
        context_id=direction.context_id,
        candidate_index=direction.candidate_index,
        selection_score=direction.selection_score,
        scores=[s if np.isfinite(s) else None for s in direction.scores],
        degenerate=direction.degenerate,
    )


def _search_and_sweep(job: tuple) -> tuple[DirectionRecord, SweepResult]:
    (index, reference, n_directions, epsilon, metric, alpha_grid, policy_config, env_config, stride, seed) = job
    policy = policy_for(policy_config, env_config.dt, stride)
    probe = BoundaryProbe(reference.context, reference.z0, policy, env_config, stride)
    direction = search_direction(
        reference.context,
        reference.z0,
        reference.z1,
        policy,
        env_config,
        stride=stride,
        n_directions=n_directions,
        epsilon=epsilon,
        metric=metric,
        rng=stream(seed, Purpose.DIRECTIONS, index),
    )
    sweep = run_alpha_sweep(
        reference.context, reference.z0, reference.z1, direction, alpha_grid, policy, env_config, stride, probe
    )
    return direction_record(direction), sweep


def run_direction_experiment(
    n_contexts: int,
    env_config: EnvConfig,
    policy_config: PolicyConfig,
    seed: int = 0,
    stride: int = 5,
    n_directions: int = 12,
    epsilon: float = 0.5,
    alpha_grid: Sequence[float] = (-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0),
    metric: Metric = "contrast",
    pool_episodes: int = 4,
    selection_rule: str = "stratified",
    workers: int = 1,
) -> DirectionReport:
    """Direction search plus alpha sweep at each reference context."""
    logger.info(
        f"Direction search: {n_contexts} contexts, {n_directions} directions, eps={epsilon}, "
        f"metric={metric}, grid={list(alpha_grid)}"
    )
    references = build_reference_contexts(
        n_contexts, env_config, policy_config, seed, stride, pool_episodes, selection_rule, workers
    )
    jobs = [
        (i, ref, n_directions, epsilon, metric, tuple(alpha_grid), policy_config, env_config, stride, seed)
        for i, ref in enumerate(references)
    ]
    results = ordered_map(_search_and_sweep, jobs, workers=workers, desc="Searching directions")
    records = [record for record, _ in results]
    sweeps = [sweep for _, sweep in results]

    def mean_abs(values: list[Optional[float]]) -> Optional[float]:
        present = [abs(v) for v in values if v is not None]
        return float(np.mean(present)) if present else None

    return DirectionReport(
        directions=records,
        sweeps=sweeps,
        mean_abs_r_btj=mean_abs([s.r_btj for s in sweeps]),
        mean_abs_r_contrast=mean_abs([s.r_contrast for s in sweeps]),
        mean_contrast_range=float(np.mean([s.contrast_range for s in sweeps])),
        decisions={
            "epsilon_role": "probe offset: score = |A(z+eps d) - A(z-eps d)|",
            "alpha_application": "z' = z + alpha d",
            "varied_noise": "z1",
            "polarity": "+alpha increases the artifact",
            "metric": metric,
        },
    )

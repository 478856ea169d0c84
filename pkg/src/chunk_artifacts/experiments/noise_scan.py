"""Fixed-context noise scans and the z0 / z1 decomposition."""

from dataclasses import dataclass
from typing import Literal

import numpy as np

from chunk_artifacts.env.contexts import ContextSnapshot, snapshot_contexts
from chunk_artifacts.env.testbed import EnvConfig
from chunk_artifacts.errors import RunnerError
from chunk_artifacts.experiments.parallel import ordered_map, policy_for, run_baseline_episodes
from chunk_artifacts.logging import get_logger
from chunk_artifacts.models import ContextScan, DecompositionResult, DecompositionRow, ScanResult
from chunk_artifacts.policy.generator import PolicyConfig
from chunk_artifacts.policy.noise import NoiseVector
from chunk_artifacts.policy.probe import BoundaryProbe
from chunk_artifacts.seeding import Purpose, stream
from chunk_artifacts.stats.intervals import bootstrap_ci

logger = get_logger("experiments.noise_scan")

Vary = Literal["z0", "z1", "both"]
_VARY_KEYS = {"z0": 0, "z1": 1, "both": 2}
_CONDITIONS: dict[str, Vary] = {"vary_z0": "z0", "vary_z1": "z1", "vary_both": "both"}


@dataclass(frozen=True)
class ReferenceContext:
    """A frozen context with the chunk noises its recorded rollout actually used."""

    context: ContextSnapshot
    z0: NoiseVector
    z1: NoiseVector


def build_reference_contexts(
    n_contexts: int,
    env_config: EnvConfig,
    policy_config: PolicyConfig,
    seed: int,
    stride: int,
    pool_episodes: int = 4,
    selection_rule: str = "stratified",
    workers: int = 1,
) -> list[ReferenceContext]:
    """
    Select contexts from unsteered rollouts and attach their recorded noises.

    A context at boundary ``t = cK`` of episode ``e`` used chunk noise ``(e, c)`` and
    would have used ``(e, c + 1)`` next.

    Raises:
        RunnerError: If the pool holds fewer boundaries than ``n_contexts``
    """
    traces = run_baseline_episodes(
        policy_config, env_config, stride, seed, range(pool_episodes), workers=workers, desc="Context pool"
    )
    contexts = snapshot_contexts(traces, n_contexts, env_config, selection_rule)
    policy = policy_for(policy_config, env_config.dt, stride)
    references = []
    for context in contexts:
        chunk = context.timestep // stride
        references.append(
            ReferenceContext(
                context=context,
                z0=policy.sample_noise(seed, context.episode_id, chunk),
                z1=policy.sample_noise(seed, context.episode_id, chunk + 1),
            )
        )
    return references


def sample_spread(values: list[float]) -> float:
    """Sample standard deviation; zero for fewer than two values."""
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def _draw_pair(
    reference: ReferenceContext, vary: Vary, rng: np.random.Generator, sample: int, policy_dim: int
) -> tuple[NoiseVector, NoiseVector]:
    ctx = reference.context.context_id
    z0, z1 = reference.z0, reference.z1
    if vary in ("z0", "both"):
        z0 = NoiseVector(base=rng.standard_normal(policy_dim), noise_id=f"{ctx}/z0s{sample}")
    if vary in ("z1", "both"):
        z1 = NoiseVector(base=rng.standard_normal(policy_dim), noise_id=f"{ctx}/z1s{sample}")
    return z0, z1


def probe_samples(
    reference: ReferenceContext,
    vary: Vary,
    n_samples: int,
    policy_config: PolicyConfig,
    env_config: EnvConfig,
    stride: int,
    rng: np.random.Generator,
) -> tuple[list[float], list[float], int]:
    """First-boundary contrast and BTJ for ``n_samples`` noise draws; invalid probes dropped."""
    policy = policy_for(policy_config, env_config.dt, stride)
    fixed_probe = None
    if vary == "z1":
        fixed_probe = BoundaryProbe(reference.context, reference.z0, policy, env_config, stride)

    contrasts: list[float] = []
    btjs: list[float] = []
    invalid = 0
    for s in range(n_samples):
        z0, z1 = _draw_pair(reference, vary, rng, s, policy.latent_dim)
        probe = fixed_probe or BoundaryProbe(reference.context, z0, policy, env_config, stride)
        summary = probe.evaluate(z1)
        if not summary.valid:
            invalid += 1
            continue
        contrasts.append(summary.jerk_contrast)
        btjs.append(summary.boundary_transition_jerk)
    return contrasts, btjs, invalid


def _scan_context(job: tuple) -> ContextScan:
    index, reference, vary, n_samples, policy_config, env_config, stride, seed = job
    rng = stream(seed, Purpose.SCAN, index, _VARY_KEYS[vary])
    contrasts, btjs, invalid = probe_samples(
        reference, vary, n_samples, policy_config, env_config, stride, rng
    )
    policy = policy_for(policy_config, env_config.dt, stride)
    ref = BoundaryProbe(reference.context, reference.z0, policy, env_config, stride).evaluate(reference.z1)
    return ContextScan(
        context_id=reference.context.context_id,
        contrasts=contrasts,
        btjs=btjs,
        contrast_std=sample_spread(contrasts),
        btj_std=sample_spread(btjs),
        reference_contrast=ref.jerk_contrast if ref.valid else None,
        reference_btj=ref.boundary_transition_jerk if ref.valid else None,
        n_invalid=invalid,
    )


def run_noise_scan(
    n_contexts: int,
    n_samples: int,
    env_config: EnvConfig,
    policy_config: PolicyConfig,
    seed: int = 0,
    stride: int = 5,
    vary: Vary = "z1",
    pool_episodes: int = 4,
    selection_rule: str = "stratified",
    n_boot: int = 10_000,
    level: float = 0.95,
    workers: int = 1,
) -> ScanResult:
    """
    Spread of first-boundary artifacts across noise draws at frozen contexts.

    Per context the reference ``z0`` stays fixed and ``n_samples`` next-chunk noises are
    drawn (``vary`` switches to redrawing ``z0`` or both). The cross-context mean of the
    within-context standard deviations gets a bootstrap interval that resamples contexts.

    Raises:
        RunnerError: If too few boundaries exist or every probe is invalid
    """
    logger.info(
        f"Noise scan: {n_contexts} contexts x {n_samples} samples, varying {vary}, seed={seed}"
    )
    references = build_reference_contexts(
        n_contexts, env_config, policy_config, seed, stride, pool_episodes, selection_rule, workers
    )
    jobs = [
        (i, ref, vary, n_samples, policy_config, env_config, stride, seed)
        for i, ref in enumerate(references)
    ]
    scans = ordered_map(_scan_context, jobs, workers=workers, desc="Scanning contexts")

    n_invalid = sum(scan.n_invalid for scan in scans)
    kept = [scan for scan in scans if scan.contrasts]
    if not kept:
        raise RunnerError("every probe in the scan was invalid")
    if n_invalid:
        logger.warning(f"Excluded {n_invalid} invalid probes")

    contrast_stds = [scan.contrast_std for scan in kept]
    btj_stds = [scan.btj_std for scan in kept]
    return ScanResult(
        vary=vary,
        n_samples=n_samples,
        contexts=scans,
        mean_contrast_std=bootstrap_ci(
            contrast_stds, n_boot=n_boot, level=level, rng=stream(seed, Purpose.BOOTSTRAP, 0)
        ),
        mean_btj_std=bootstrap_ci(
            btj_stds, n_boot=n_boot, level=level, rng=stream(seed, Purpose.BOOTSTRAP, 1)
        ),
        n_invalid=n_invalid,
        decisions={
            "vary": vary,
            "vary_note": "which chunk noise a context-level scan varies is a configurable choice",
            "bootstrap_unit": "context",
            "std_ddof": 1,
        },
    )


def pooled_spread(groups: list[list[float]]) -> float:
    """Pooled within-group standard deviation ``sqrt(sum (n-1) s^2 / sum (n-1))``."""
    dof = sum(len(g) - 1 for g in groups if len(g) >= 2)
    if dof == 0:
        return 0.0
    total = sum((len(g) - 1) * sample_spread(g) ** 2 for g in groups if len(g) >= 2)
    return float(np.sqrt(total / dof))


def run_decomposition(
    n_contexts: int,
    n_samples: int,
    env_config: EnvConfig,
    policy_config: PolicyConfig,
    seed: int = 0,
    stride: int = 5,
    pool_episodes: int = 4,
    selection_rule: str = "stratified",
    workers: int = 1,
) -> DecompositionResult:
    """
    Artifact spread when redrawing only z0, only z1, or both, from shared references.

    Raises:
        RunnerError: If too few boundaries exist or a condition has no valid probe
    """
    logger.info(f"Decomposition: {n_contexts} contexts x {n_samples} samples per condition")
    references = build_reference_contexts(
        n_contexts, env_config, policy_config, seed, stride, pool_episodes, selection_rule, workers
    )

    rows = []
    n_invalid = 0
    spreads: dict[str, tuple[float, float]] = {}
    for condition, vary in _CONDITIONS.items():
        btj_groups, contrast_groups = [], []
        for i, reference in enumerate(references):
            rng = stream(seed, Purpose.SCAN, i, 10 + _VARY_KEYS[vary])
            contrasts, btjs, invalid = probe_samples(
                reference, vary, n_samples, policy_config, env_config, stride, rng
            )
            n_invalid += invalid
            if contrasts:
                contrast_groups.append(contrasts)
                btj_groups.append(btjs)
        if not contrast_groups:
            raise RunnerError(f"condition {condition} produced no valid probe")
        btj_std, contrast_std = pooled_spread(btj_groups), pooled_spread(contrast_groups)
        spreads[condition] = (btj_std, contrast_std)
        rows.append(
            DecompositionRow(
                condition=condition,  # type: ignore[arg-type]
                btj_std=btj_std,
                contrast_std=contrast_std,
                n_samples=n_samples,
                n_contexts=len(contrast_groups),
            )
        )
        logger.info(f"{condition}: BTJ std={btj_std:.4f} contrast std={contrast_std:.4f}")

    def gap(k: int) -> float:
        both = spreads["vary_both"][k]
        return both - float(np.hypot(spreads["vary_z0"][k], spreads["vary_z1"][k]))

    return DecompositionResult(
        rows=rows,
        btj_quadrature_gap=gap(0),
        contrast_quadrature_gap=gap(1),
        n_invalid=n_invalid,
        decisions={"pooling": "pooled within-context SD", "references": "recorded rollout noise"},
    )

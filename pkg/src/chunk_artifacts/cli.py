"""Command-line interface for chunk-artifacts."""

import json
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any, Optional

import typer
import yaml

from chunk_artifacts import __version__
from chunk_artifacts.config import RunConfig, deep_merge, load_preset, parse_assignments
from chunk_artifacts.errors import (
    CapabilityError,
    ChunkArtifactError,
    ConfigError,
    ContractViolation,
    RunnerError,
    TraceParseError,
)
from chunk_artifacts.experiments.association import analyze_traces, run_outcome_association
from chunk_artifacts.experiments.calibration import calibrate_slip_threshold
from chunk_artifacts.experiments.directions import run_direction_experiment
from chunk_artifacts.experiments.noise_scan import run_decomposition, run_noise_scan
from chunk_artifacts.experiments.parallel import run_baseline_episodes
from chunk_artifacts.experiments.steering import aggregate_reports, run_trajectory_steering
from chunk_artifacts.io.reports import read_steering_report, write_report
from chunk_artifacts.io.traces import read_traces, write_batch
from chunk_artifacts.logging import get_logger, setup_logging

logger = get_logger("cli")

EXIT_CONFIG = 2
EXIT_CAPABILITY = 3
EXIT_RUNNER = 4
EXIT_IO = 5

app = typer.Typer(
    name="chunkart",
    help="Measure and steer chunk-boundary artifacts in action-chunked policies.",
    add_completion=False,
    no_args_is_help=True,
)

ConfigOption = Annotated[
    Optional[Path], typer.Option("--config", "-c", help="YAML run-config file", exists=True, dir_okay=False)
]
PresetOption = Annotated[Optional[str], typer.Option("--preset", "-p", help="Packaged preset, e.g. paper-goal3")]
SetOption = Annotated[
    Optional[list[str]], typer.Option("--set", "-s", help="Dotted override, e.g. scan.n_samples=8")
]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Root seed")]
OutOption = Annotated[
    Optional[Path], typer.Option("--out", "-o", envvar="CHUNKART_OUTPUT_DIR", help="Output directory")
]
WorkersOption = Annotated[Optional[int], typer.Option("--workers", "-w", help="Parallel episode workers")]
LogLevelOption = Annotated[Optional[str], typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")]


def build_config(
    config_path: Optional[Path] = None,
    preset: Optional[str] = None,
    assignments: Optional[list[str]] = None,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
    workers: Optional[int] = None,
    log_level: Optional[str] = None,
) -> RunConfig:
    """Defaults, then preset, then config file, then ``--set`` overrides, then explicit flags."""
    data: dict[str, Any] = load_preset(preset) if preset else {}
    if config_path is not None:
        try:
            with open(config_path, "r") as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError("<root>", f"{config_path} is not valid YAML: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError("<root>", f"{config_path} does not hold a mapping")
        data = deep_merge(data, loaded)
    data = deep_merge(data, parse_assignments(assignments or []))
    flags = {"seed": seed, "output_dir": None if out is None else str(out), "workers": workers, "log_level": log_level}
    data.update({key: value for key, value in flags.items() if value is not None})
    return RunConfig.from_dict(data)


@contextmanager
def exit_codes() -> Iterator[None]:
    """Map package errors onto the documented exit statuses."""
    try:
        yield
    except (ConfigError, ContractViolation) as e:
        logger.error(f"Configuration error: {e}")
        raise typer.Exit(EXIT_CONFIG) from e
    except CapabilityError as e:
        logger.error(f"Capability error: {e}")
        raise typer.Exit(EXIT_CAPABILITY) from e
    except RunnerError as e:
        logger.error(f"Runner failed: {e}")
        raise typer.Exit(EXIT_RUNNER) from e
    except (TraceParseError, OSError) as e:
        logger.error(f"I/O error: {e}")
        raise typer.Exit(EXIT_IO) from e
    except ChunkArtifactError as e:
        logger.error(f"Experiment failed: {e}")
        raise typer.Exit(EXIT_RUNNER) from e


def _prepare(**options: Any) -> RunConfig:
    setup_logging()
    config = build_config(**options)
    setup_logging(config.log_level)
    logger.info(f"chunk-artifacts {__version__}, config hash {config.config_hash()[:12]}, seed {config.seed}")
    return config


def _emit(payload: dict[str, Any]) -> None:
    typer.echo(json.dumps(payload, sort_keys=True))


def _write(config: RunConfig, report: Any, name: str) -> dict[str, list[str]]:
    out = Path(config.output_dir)
    effective, digest = config.effective(), config.config_hash()
    structured = write_report(report, out / f"{name}.json", "structured", effective, digest)
    tabular = write_report(report, out / f"{name}.csv", "tabular", effective, digest)
    return {"structured": [str(p) for p in structured], "tabular": [str(p) for p in tabular]}


def _command(body: Callable[[], dict[str, Any]]) -> None:
    with exit_codes():
        _emit(body())


@app.command()
def rollout(
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    log_level: LogLevelOption = None,
    n_episodes: Annotated[Optional[int], typer.Option("--episodes", "-n", help="Episodes to roll out")] = None,
) -> None:
    """Batch rollouts without intervention: one trace file per episode plus a manifest."""

    def body() -> dict[str, Any]:
        config = _prepare(
            config_path=config_path,
            preset=preset,
            assignments=(assignments or []) + ([f"rollout.n_episodes={n_episodes}"] if n_episodes else []),
            seed=seed,
            out=out,
            workers=workers,
            log_level=log_level,
        )
        env = config.env_config()
        traces = run_baseline_episodes(
            config.policy, env, config.stride, config.seed, range(config.rollout.n_episodes), workers=config.workers
        )
        manifest = write_batch(Path(config.output_dir) / "traces", traces, config.effective(), config.config_hash())
        return {
            "manifest": str(manifest),
            "n_episodes": len(traces),
            "n_success": sum(1 for t in traces if t.outcome),
            "n_invalid": sum(1 for t in traces if not t.valid),
        }

    _command(body)


@app.command()
def analyze(
    traces: Annotated[
        Optional[Path], typer.Argument(help="Trace file, directory or manifest; omit to roll out fresh episodes")
    ] = None,
    controls: Annotated[Optional[str], typer.Option("--controls", help="Comma-separated control windows")] = None,
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    log_level: LogLevelOption = None,
) -> None:
    """Outcome association between episode jerk contrast and success."""

    def body() -> dict[str, Any]:
        extra = [f"association.controls=[{controls}]"] if controls else []
        config = _prepare(
            config_path=config_path,
            preset=preset,
            assignments=(assignments or []) + extra,
            seed=seed,
            out=out,
            workers=workers,
            log_level=log_level,
        )
        section = config.association
        if traces is None:
            report, _ = run_outcome_association(
                section.n_episodes,
                config.env_config(),
                config.policy,
                controls=section.controls,
                seed=config.seed,
                stride=config.stride,
                first_n=section.first_n,
                guard_margin=section.guard_margin,
                n_perm=section.n_perm,
                sidedness=section.sidedness,
                workers=config.workers,
            )
        else:
            loaded = read_traces(traces, expected_config_hash=config.config_hash())
            if not loaded:
                raise RunnerError(f"no traces found under {traces}")
            report = analyze_traces(
                loaded,
                section.controls,
                first_n=section.first_n,
                guard_margin=section.guard_margin,
                n_perm=section.n_perm,
                sidedness=section.sidedness,
                seed=config.seed,
            )
        files = _write(config, report, "association")
        return {
            "files": files,
            "n_episodes": report.n_episodes,
            "rows": [
                {"control": r.control, "delta": r.delta, "p_value": None if r.test is None else r.test.p_value}
                for r in report.rows
            ],
        }

    _command(body)


@app.command()
def scan(
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    log_level: LogLevelOption = None,
) -> None:
    """Within-context artifact spread across noise draws at frozen contexts."""

    def body() -> dict[str, Any]:
        config = _prepare(
            config_path=config_path,
            preset=preset,
            assignments=assignments,
            seed=seed,
            out=out,
            workers=workers,
            log_level=log_level,
        )
        section = config.scan
        result = run_noise_scan(
            section.n_contexts,
            section.n_samples,
            config.env_config(),
            config.policy,
            seed=config.seed,
            stride=config.stride,
            vary=section.vary,
            pool_episodes=section.pool_episodes,
            selection_rule=section.selection_rule,
            n_boot=section.n_boot,
            level=section.level,
            workers=config.workers,
        )
        return {
            "files": _write(config, result, "scan"),
            "mean_contrast_std": result.mean_contrast_std.point,
            "mean_btj_std": result.mean_btj_std.point,
        }

    _command(body)


@app.command()
def decompose(
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    log_level: LogLevelOption = None,
) -> None:
    """Artifact spread when redrawing the current-chunk noise, the next-chunk noise, or both."""

    def body() -> dict[str, Any]:
        config = _prepare(
            config_path=config_path,
            preset=preset,
            assignments=assignments,
            seed=seed,
            out=out,
            workers=workers,
            log_level=log_level,
        )
        section = config.decomposition
        result = run_decomposition(
            section.n_contexts,
            section.n_samples,
            config.env_config(),
            config.policy,
            seed=config.seed,
            stride=config.stride,
            pool_episodes=section.pool_episodes,
            selection_rule=section.selection_rule,
            workers=config.workers,
        )
        return {
            "files": _write(config, result, "decomposition"),
            "rows": {row.condition: {"btj_std": row.btj_std, "contrast_std": row.contrast_std} for row in result.rows},
        }

    _command(body)


@app.command()
def direction(
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    log_level: LogLevelOption = None,
) -> None:
    """Random direction search and alpha sweeps at frozen contexts."""

    def body() -> dict[str, Any]:
        config = _prepare(
            config_path=config_path,
            preset=preset,
            assignments=assignments,
            seed=seed,
            out=out,
            workers=workers,
            log_level=log_level,
        )
        section = config.direction
        report = run_direction_experiment(
            section.n_contexts,
            config.env_config(),
            config.policy,
            seed=config.seed,
            stride=config.stride,
            n_directions=section.n_directions,
            epsilon=section.epsilon,
            alpha_grid=section.alpha_grid,
            metric=section.metric,
            pool_episodes=section.pool_episodes,
            selection_rule=section.selection_rule,
            workers=config.workers,
        )
        return {
            "files": _write(config, report, "direction"),
            "mean_abs_r_contrast": report.mean_abs_r_contrast,
            "mean_abs_r_btj": report.mean_abs_r_btj,
        }

    _command(body)


@app.command()
def steer(
    arms: Annotated[Optional[str], typer.Option("--arms", help="Comma-separated arms: baseline,good,bad")] = None,
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    log_level: LogLevelOption = None,
) -> None:
    """Trajectory-level steering arms with success and contrast intervals."""

    def body() -> dict[str, Any]:
        extra = [f"steering.arms=[{arms}]"] if arms else []
        config = _prepare(
            config_path=config_path,
            preset=preset,
            assignments=(assignments or []) + extra,
            seed=seed,
            out=out,
            workers=workers,
            log_level=log_level,
        )
        section = config.steering
        report = run_trajectory_steering(
            section.arms,
            section.n_episodes_per_arm,
            section.alpha_magnitude,
            section.warmup_boundaries,
            config.env_config(),
            config.policy,
            seed=config.seed,
            stride=config.stride,
            n_directions=section.n_directions,
            epsilon=section.epsilon,
            metric=section.metric,
            research_each_boundary=section.research_each_boundary,
            episode_offset=section.episode_offset,
            n_boot=section.n_boot,
            level=section.level,
            workers=config.workers,
            preset=preset or config.env.preset,
        )
        return {
            "files": _write(config, report, "steering"),
            "contrast_ordering": report.contrast_ordering,
            "success_ordering": report.success_ordering,
            "n_fallback": report.n_fallback,
        }

    _command(body)


@app.command()
def aggregate(
    reports: Annotated[list[Path], typer.Argument(help="Structured steering reports to pool")],
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    log_level: LogLevelOption = None,
) -> None:
    """Pool steering reports arm by arm and recompute intervals."""

    def body() -> dict[str, Any]:
        config = _prepare(
            config_path=config_path,
            preset=preset,
            assignments=assignments,
            seed=seed,
            out=out,
            log_level=log_level,
        )
        loaded = [read_steering_report(path) for path in reports]
        pooled = aggregate_reports(
            loaded, n_boot=config.aggregate.n_boot, level=config.aggregate.level, seed=config.seed
        )
        return {
            "files": _write(config, pooled, "aggregate"),
            "contrast_ordering": pooled.contrast_ordering,
            "success_ordering": pooled.success_ordering,
        }

    _command(body)


@app.command()
def calibrate(
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    workers: WorkersOption = None,
    log_level: LogLevelOption = None,
) -> None:
    """Sweep the slip threshold toward a target baseline success rate."""

    def body() -> dict[str, Any]:
        config = _prepare(
            config_path=config_path,
            preset=preset,
            assignments=assignments,
            seed=seed,
            out=out,
            workers=workers,
            log_level=log_level,
        )
        section = config.calibration
        result = calibrate_slip_threshold(
            section.target_success,
            section.thresholds,
            config.env_config(),
            config.policy,
            n_episodes=section.n_episodes,
            seed=config.seed,
            stride=config.stride,
            workers=config.workers,
        )
        return {
            "files": _write(config, result, "calibration"),
            "chosen_threshold": result.chosen_threshold,
            "chosen_success": result.chosen_success,
        }

    _command(body)


@app.command("config")
def show_config(
    config_path: ConfigOption = None,
    preset: PresetOption = None,
    assignments: SetOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    save: Annotated[Optional[Path], typer.Option("--save", help="Also write the effective config as YAML")] = None,
) -> None:
    """Print the effective configuration and its hash."""

    def body() -> dict[str, Any]:
        config = build_config(config_path=config_path, preset=preset, assignments=assignments, seed=seed, out=out)
        config.env_config()
        if save is not None:
            config.to_yaml(save)
        return {"tool_version": __version__, "config_hash": config.config_hash(), "config": config.effective()}

    _command(body)


def version_callback(value: bool) -> None:
    if value:
        typer.echo(__version__)
        raise typer.Exit()


@app.callback()
def main(
    version: Annotated[
        Optional[bool], typer.Option("--version", callback=version_callback, is_eager=True, help="Show version")
    ] = None,
) -> None:
    """chunk-artifacts command-line tools."""

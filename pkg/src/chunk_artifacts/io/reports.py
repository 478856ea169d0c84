"""Structured (JSON envelope) and tabular (CSV) report files."""

import csv
import io
import json
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ValidationError

from chunk_artifacts import __version__
from chunk_artifacts.errors import ContractViolation, TraceParseError
from chunk_artifacts.logging import get_logger
from chunk_artifacts.models import (
    AssociationReport,
    CalibrationResult,
    DecompositionResult,
    DirectionReport,
    ReportEnvelope,
    ScanResult,
    SteeringReport,
)

logger = get_logger("io.reports")

ReportFormat = Literal["structured", "tabular"]

REPORT_TYPES: dict[str, type[BaseModel]] = {
    "association": AssociationReport,
    "scan": ScanResult,
    "decomposition": DecompositionResult,
    "direction": DirectionReport,
    "steering": SteeringReport,
    "calibration": CalibrationResult,
}

STEERING_COLUMNS = [
    "arm",
    "n",
    "success_rate",
    "success_lo",
    "success_hi",
    "contrast",
    "contrast_lo",
    "contrast_hi",
]


def report_type(report: BaseModel) -> str:
    for name, model in REPORT_TYPES.items():
        if isinstance(report, model):
            return name
    raise ContractViolation(f"unsupported report type {type(report).__name__}")


def envelope(report: BaseModel, config: Optional[dict[str, Any]] = None, config_hash: str = "") -> ReportEnvelope:
    # model_dump_json maps NaN and inf to null
    return ReportEnvelope(
        tool_version=__version__,
        report_type=report_type(report),
        config=config or {},
        config_hash=config_hash,
        report=json.loads(report.model_dump_json()),
    )


def dumps_structured(report: BaseModel, config: Optional[dict[str, Any]] = None, config_hash: str = "") -> str:
    payload = envelope(report, config, config_hash).model_dump(mode="json")
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _table(columns: Sequence[str], rows: Iterable[Sequence[Any]], comments: Sequence[str]) -> str:
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def steering_table(report: SteeringReport) -> tuple[list[str], list[list[Any]]]:
    """Arm vs success rate and mean contrast with interval bounds; empty arms have no row."""
    rows = []
    for group in report.groups:
        if group.n == 0 or group.success_rate is None or group.contrast_mean is None:
            continue
        rate, contrast = group.success_rate, group.contrast_mean
        rows.append([group.arm, group.n, rate.point, rate.lo, rate.hi, contrast.point, contrast.lo, contrast.hi])
    return STEERING_COLUMNS, rows


def association_table(report: AssociationReport) -> tuple[list[str], list[list[Any]]]:
    columns = [
        "control",
        "n_success",
        "n_failure",
        "success_mean",
        "failure_mean",
        "delta",
        "p_value",
        "sidedness",
        "applicable",
    ]
    rows = []
    for row in report.rows:
        test = row.test
        rows.append(
            [
                row.control,
                row.n_success,
                row.n_failure,
                row.success_mean,
                row.failure_mean,
                row.delta,
                None if test is None else test.p_value,
                report.decisions.get("sidedness") if test is None else test.sidedness,
                row.applicable,
            ]
        )
    return columns, rows


def time_course_table(report: AssociationReport) -> tuple[list[str], list[list[Any]]]:
    """Per-timestep mean jerk per outcome group with boundary markers every K."""
    courses = {course.group: course for course in report.time_courses}
    groups = [g for g in ("success", "failure") if g in courses]
    columns = ["t", *(f"mean_jerk_{g}" for g in groups), "boundary"]
    if not groups:
        return columns, []
    first = courses[groups[0]]
    boundaries = set(first.boundary_timesteps)
    rows = []
    for i, t in enumerate(first.timesteps):
        rows.append([t, *(courses[g].mean_jerk[i] for g in groups), t in boundaries])
    return columns, rows


def phase_profile_table(report: AssociationReport) -> tuple[list[str], list[list[Any]]]:
    profiles = {profile.group: profile for profile in report.profiles}
    groups = [g for g in ("success", "failure") if g in profiles]
    columns = ["phase", *(f"mean_jerk_{g}" for g in groups)]
    if not groups:
        return columns, []
    stride = len(profiles[groups[0]].mean_jerk_by_phase)
    rows = [[k, *(profiles[g].mean_jerk_by_phase[k] for g in groups)] for k in range(stride)]
    return columns, rows


def scan_table(report: ScanResult) -> tuple[list[str], list[list[Any]]]:
    columns = ["context_id", "n_valid", "contrast_std", "btj_std", "reference_contrast", "reference_btj"]
    rows = [
        [c.context_id, len(c.contrasts), c.contrast_std, c.btj_std, c.reference_contrast, c.reference_btj]
        for c in report.contexts
    ]
    return columns, rows


def decomposition_table(report: DecompositionResult) -> tuple[list[str], list[list[Any]]]:
    columns = ["condition", "btj_std", "contrast_std", "n_samples", "n_contexts"]
    rows = [[r.condition, r.btj_std, r.contrast_std, r.n_samples, r.n_contexts] for r in report.rows]
    return columns, rows


def direction_table(report: DirectionReport) -> tuple[list[str], list[list[Any]]]:
    """Alpha vs artifact, one row per context and grid point."""
    columns = ["context_id", "direction_id", "alpha", "btj", "contrast"]
    rows = []
    for sweep in report.sweeps:
        for alpha, btj, contrast in zip(sweep.alpha_grid, sweep.btj, sweep.contrast):
            rows.append([sweep.context_id, sweep.direction_id, alpha, btj, contrast])
    return columns, rows


def calibration_table(report: CalibrationResult) -> tuple[list[str], list[list[Any]]]:
    rows = [[t, r, t == report.chosen_threshold] for t, r in zip(report.thresholds, report.success_rates)]
    return ["slip_threshold", "success_rate", "chosen"], rows


_TABLES = {
    "association": association_table,
    "scan": scan_table,
    "decomposition": decomposition_table,
    "direction": direction_table,
    "steering": steering_table,
    "calibration": calibration_table,
}


def _comments(kind: Optional[str], config: Optional[dict[str, Any]], config_hash: str) -> list[str]:
    """Header comment lines; the config line is one canonical JSON object."""
    comments = [f"tool_version={__version__}"]
    if kind is not None:
        comments.append(f"report_type={kind}")
    comments.append(f"config_hash={config_hash}")
    comments.append("config=" + json.dumps(config or {}, sort_keys=True, separators=(",", ":"), allow_nan=False))
    return comments


def read_table_config(path: str | Path) -> dict[str, Any]:
    """
    Effective config recorded in the comment header of a CSV report.

    Raises:
        TraceParseError: If the header carries no parseable config line
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.startswith("# "):
                break
            if line.startswith("# config="):
                try:
                    return json.loads(line[len("# config="):])
                except json.JSONDecodeError as e:
                    raise TraceParseError(path, number, f"config comment is not valid JSON: {e.msg}") from e
    raise TraceParseError(path, 1, "no config comment in the table header")


def dumps_tabular(report: BaseModel, config: Optional[dict[str, Any]] = None, config_hash: str = "") -> str:
    kind = report_type(report)
    columns, rows = _TABLES[kind](report)  # type: ignore[operator]
    return _table(columns, rows, _comments(kind, config, config_hash))


def write_report(
    report: BaseModel,
    path: str | Path,
    format: ReportFormat = "structured",
    config: Optional[dict[str, Any]] = None,
    config_hash: str = "",
) -> list[Path]:
    """
    Write a report as a JSON envelope or as plot-ready CSV.

    Both forms carry the tool version, the config hash and the effective config; CSV files
    hold them as leading ``#`` comment lines.

    The tabular form of an association report also writes ``<stem>_time_course.csv`` and
    ``<stem>_phase_profile.csv`` next to ``path``.

    Returns:
        Paths written, main file first
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "structured":
        path.write_text(dumps_structured(report, config, config_hash), encoding="utf-8")
        written = [path]
    elif format == "tabular":
        path.write_text(dumps_tabular(report, config, config_hash), encoding="utf-8")
        written = [path]
        if isinstance(report, AssociationReport):
            comments = _comments(None, config, config_hash)
            for suffix, table in (("time_course", time_course_table), ("phase_profile", phase_profile_table)):
                extra = path.with_name(f"{path.stem}_{suffix}.csv")
                columns, rows = table(report)
                extra.write_text(_table(columns, rows, comments), encoding="utf-8")
                written.append(extra)
    else:
        raise ContractViolation(f"unknown report format '{format}'")
    logger.info(f"Wrote {report_type(report)} report to {path}")
    return written


def read_report(path: str | Path) -> tuple[ReportEnvelope, BaseModel]:
    """
    Read a structured report and rebuild its typed model.

    Raises:
        TraceParseError: If the file is not a valid report envelope
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise TraceParseError(path, e.lineno, f"not valid JSON: {e.msg}") from e
    try:
        env = ReportEnvelope(**data)
    except (TypeError, ValidationError) as e:
        raise TraceParseError(path, 1, f"not a report envelope: {e}") from e
    model = REPORT_TYPES.get(env.report_type)
    if model is None:
        raise TraceParseError(path, 1, f"unknown report type '{env.report_type}'")
    try:
        return env, model(**env.report)
    except ValidationError as e:
        raise TraceParseError(path, 1, f"invalid {env.report_type} report: {e.errors()[0]['msg']}") from e


def read_steering_report(path: str | Path) -> SteeringReport:
    env, report = read_report(path)
    if not isinstance(report, SteeringReport):
        raise TraceParseError(Path(path), 1, f"expected a steering report, got '{env.report_type}'")
    return report

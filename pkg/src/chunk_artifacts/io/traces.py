"""Line-delimited JSON trace files and batch manifests.

A trace file holds one JSON object per line:

- a ``header`` record with the format version, stride, horizon, action dimension, phase
  offset, source, seed record, config hash and the version of the writing tool;
- a ``chunk`` record before the first step of every chunk;
- one ``step`` record per executed action;
- a closing ``trailer`` record with the outcome and episode metadata.

Encoding is canonical (sorted keys, no whitespace, shortest round-trip float repr), so equal
traces produce identical bytes.
"""

import json
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from chunk_artifacts import __version__
from chunk_artifacts.chunking.types import ChunkRecord, RolloutTrace, chunk_of_step
from chunk_artifacts.errors import ContractViolation, TraceParseError
from chunk_artifacts.logging import get_logger

logger = get_logger("io.traces")

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


class TraceHeader(BaseModel):
    """First record of a trace file."""

    format_version: int = Field(..., description="Trace format version")
    stride: int = Field(..., ge=1, description="Replanning stride K")
    horizon: int = Field(..., ge=1, description="Chunk horizon H")
    action_dim: int = Field(..., ge=1, description="Action dimension D")
    phase_offset: int = Field(default=0, ge=0, description="Timestep of the first full chunk")
    source: Literal["testbed", "external", "probe"] = Field(default="external")
    seed_record: dict[str, Any] = Field(default_factory=dict)
    config_hash: str = Field(default="", description="Hash of the producing run config")
    tool_version: str = Field(default="", description="Package version that wrote the trace")

    @model_validator(mode="after")
    def _stride_fits(self) -> "TraceHeader":
        if self.stride > self.horizon:
            raise ValueError(f"stride {self.stride} exceeds horizon {self.horizon}")
        if self.phase_offset >= self.stride:
            raise ValueError("phase_offset must be smaller than the stride")
        return self


def canonical_json(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _optional_float(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value)


def trace_records(trace: RolloutTrace, config_hash: str = "") -> Iterator[dict[str, Any]]:
    """Yield the records of ``trace`` in file order."""
    yield {
        "kind": "header",
        "format_version": FORMAT_VERSION,
        "stride": trace.stride,
        "horizon": trace.horizon,
        "action_dim": trace.action_dim,
        "phase_offset": trace.phase_offset,
        "source": trace.source,
        "seed_record": trace.seed_record,
        "config_hash": config_hash,
        "tool_version": __version__,
    }

    records = {record.chunk_index: record for record in trace.chunk_records}
    emitted: set[int] = set()
    phases = trace.phases
    for t in range(trace.length):
        index = int(trace.step_chunks[t])
        record = records[index]
        if index not in emitted:
            emitted.add(index)
            yield {
                "kind": "chunk",
                "chunk_index": index,
                "context_id": record.context_id,
                "noise_id": record.noise_id,
                "alpha": _optional_float(record.alpha),
                "direction_id": record.direction_id,
            }
        yield {
            "kind": "step",
            "t": t,
            "action": [float(a) for a in trace.executed[t]],
            "chunk_index": index,
            "phase": int(phases[t]),
            "contact": None if trace.contact_mask is None else bool(trace.contact_mask[t]),
            "alpha": _optional_float(record.alpha),
            "direction_id": record.direction_id,
        }
    for index, record in records.items():
        if index not in emitted:
            yield {
                "kind": "chunk",
                "chunk_index": index,
                "context_id": record.context_id,
                "noise_id": record.noise_id,
                "alpha": _optional_float(record.alpha),
                "direction_id": record.direction_id,
            }

    yield {
        "kind": "trailer",
        "episode_id": trace.episode_id,
        "outcome": bool(trace.outcome),
        "terminal_reason": trace.terminal_reason,
        "valid": bool(trace.valid),
        "flags": list(trace.flags),
        "length": trace.length,
    }


def dumps_trace(trace: RolloutTrace, config_hash: str = "") -> str:
    return "".join(canonical_json(record) + "\n" for record in trace_records(trace, config_hash))


def write_trace(trace: RolloutTrace, path: str | Path, config_hash: str = "") -> Path:
    """Write ``trace`` to ``path`` in the canonical line format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_trace(trace, config_hash), encoding="utf-8")
    logger.debug(f"Wrote trace of episode {trace.episode_id} ({trace.length} steps) to {path}")
    return path


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _reject_constant(token: str) -> float:
    raise ValueError(f"non-finite value {token}")


def _parse_line(path: Path, number: int, line: str) -> dict[str, Any]:
    try:
        record = json.loads(line, parse_constant=_reject_constant)
    except ValueError as e:
        raise TraceParseError(path, number, f"not a valid record: {e}") from e
    if not isinstance(record, dict) or "kind" not in record:
        raise TraceParseError(path, number, "record must be an object with a 'kind' field")
    return record


def _require(path: Path, number: int, record: dict[str, Any], *keys: str) -> None:
    missing = [key for key in keys if key not in record]
    if missing:
        raise TraceParseError(path, number, f"{record['kind']} record lacks {missing}")


def _header(path: Path, number: int, record: dict[str, Any]) -> TraceHeader:
    if record.get("kind") != "header":
        raise TraceParseError(path, number, "first record must be the header")
    version = record.get("format_version")
    if version != FORMAT_VERSION:
        raise TraceParseError(path, number, f"unsupported format version {version!r}")
    fields = {k: v for k, v in record.items() if k != "kind"}
    try:
        return TraceHeader(**fields)
    except ValidationError as e:
        raise TraceParseError(path, number, f"bad header: {e.errors()[0]['msg']}") from e


def read_header(path: str | Path) -> TraceHeader:
    """Read and validate only the header record of a trace file."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    if not first.strip():
        raise TraceParseError(path, 1, "empty trace file")
    return _header(path, 1, _parse_line(path, 1, first))


def read_trace(path: str | Path, expected_config_hash: Optional[str] = None) -> RolloutTrace:
    """
    Parse a trace file written by ``write_trace`` or produced by an external recorder.

    A config-hash mismatch against ``expected_config_hash`` is logged as a warning.

    Raises:
        TraceParseError: On version mismatch, truncation, non-finite values or inconsistent
            records; the message names the offending line
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise TraceParseError(path, 1, "empty trace file")

    header = _header(path, 1, _parse_line(path, 1, lines[0]))
    if expected_config_hash is not None and header.config_hash != expected_config_hash:
        logger.warning(
            f"{path}: config hash {header.config_hash[:12] or '<none>'} differs from the "
            f"current config {expected_config_hash[:12]}"
        )

    records: dict[int, ChunkRecord] = {}
    actions: list[list[float]] = []
    step_chunks: list[int] = []
    contact: list[Optional[bool]] = []
    trailer: Optional[dict[str, Any]] = None
    trailer_line = 0

    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if trailer is not None:
            raise TraceParseError(path, number, "record after the trailer")
        record = _parse_line(path, number, line)
        kind = record["kind"]
        if kind == "chunk":
            _require(path, number, record, "chunk_index", "context_id")
            index = int(record["chunk_index"])
            if index in records:
                raise TraceParseError(path, number, f"duplicate chunk record {index}")
            alpha = record.get("alpha")
            records[index] = ChunkRecord(
                chunk_index=index,
                context_id=str(record["context_id"]),
                noise_id=record.get("noise_id"),
                alpha=None if alpha is None else float(alpha),
                direction_id=record.get("direction_id"),
            )
        elif kind == "step":
            _require(path, number, record, "t", "action", "chunk_index")
            if record["t"] != len(actions):
                raise TraceParseError(path, number, f"expected step {len(actions)}, got {record['t']}")
            action = record["action"]
            if not isinstance(action, list) or len(action) != header.action_dim:
                raise TraceParseError(path, number, f"action must have {header.action_dim} components")
            if not all(_is_number(a) and np.isfinite(a) for a in action):
                raise TraceParseError(path, number, "action holds non-finite or non-numeric values")
            index = record["chunk_index"]
            expected_chunk = int(chunk_of_step(len(actions), header.stride, header.phase_offset))
            if not isinstance(index, int) or isinstance(index, bool) or index != expected_chunk:
                raise TraceParseError(
                    path, number, f"step {len(actions)} belongs to chunk {expected_chunk}, not {index!r}"
                )
            if index not in records:
                raise TraceParseError(path, number, f"step refers to unannounced chunk {index}")
            phase = record.get("phase")
            expected_phase = (len(actions) - header.phase_offset) % header.stride
            if phase is not None and phase != expected_phase:
                raise TraceParseError(path, number, f"phase {phase} does not match the stride grid")
            actions.append([float(a) for a in action])
            step_chunks.append(index)
            contact.append(record.get("contact"))
        elif kind == "trailer":
            _require(path, number, record, "episode_id", "outcome")
            trailer, trailer_line = record, number
        else:
            raise TraceParseError(path, number, f"unknown record kind '{kind}'")

    if trailer is None:
        raise TraceParseError(path, len(lines) + 1, "truncated file: missing trailer record")
    if "length" in trailer and trailer["length"] != len(actions):
        raise TraceParseError(
            path, trailer_line, f"trailer length {trailer['length']} but {len(actions)} steps read"
        )
    if not actions and trailer.get("valid", True):
        raise TraceParseError(path, trailer_line, "trace has no steps")

    if all(c is None for c in contact):
        mask = None
    elif any(c is None for c in contact):
        raise TraceParseError(path, trailer_line, "contact is present on some steps only")
    else:
        mask = np.array(contact, dtype=bool)

    try:
        return RolloutTrace(
            executed=np.array(actions, dtype=float).reshape(len(actions), header.action_dim),
            stride=header.stride,
            horizon=header.horizon,
            chunk_records=tuple(records.values()),
            step_chunks=np.array(step_chunks, dtype=np.int64),
            contact_mask=mask,
            outcome=bool(trailer["outcome"]),
            episode_id=int(trailer["episode_id"]),
            seed_record=header.seed_record,
            phase_offset=header.phase_offset,
            terminal_reason=str(trailer.get("terminal_reason", "timeout")),
            valid=bool(trailer.get("valid", True)),
            flags=tuple(trailer.get("flags", ())),
            source=header.source,
        )
    except ContractViolation as e:
        raise TraceParseError(path, trailer_line, str(e)) from e


def trace_filename(episode_id: int) -> str:
    return f"episode_{episode_id:06d}.jsonl"


def write_manifest(
    directory: str | Path,
    traces: Iterable[RolloutTrace],
    config: dict[str, Any],
    config_hash: str,
) -> Path:
    """Write ``manifest.json`` listing the trace files of a batch in episode order."""
    directory = Path(directory)
    entries = [
        {
            "episode_id": trace.episode_id,
            "file": trace_filename(trace.episode_id),
            "outcome": bool(trace.outcome),
            "length": trace.length,
            "valid": bool(trace.valid),
            "terminal_reason": trace.terminal_reason,
        }
        for trace in sorted(traces, key=lambda t: t.episode_id)
    ]
    manifest = {
        "tool_version": __version__,
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash,
        "config": config,
        "traces": entries,
    }
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    return path


def write_batch(
    directory: str | Path,
    traces: Iterable[RolloutTrace],
    config: dict[str, Any],
    config_hash: str,
) -> Path:
    """Write one trace file per episode plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    traces = list(traces)
    for trace in traces:
        write_trace(trace, directory / trace_filename(trace.episode_id), config_hash)
    path = write_manifest(directory, traces, config, config_hash)
    logger.info(f"Wrote {len(traces)} traces and a manifest to {directory}")
    return path


def discover_traces(path: str | Path) -> list[Path]:
    """
    Resolve trace files from a single file, a manifest, or a directory.

    A directory with a manifest yields the manifest's files in its order; without one, every
    ``*.jsonl`` file in name order.
    """
    path = Path(path)
    if path.is_dir():
        manifest = path / MANIFEST_NAME
        if manifest.is_file():
            return discover_traces(manifest)
        return sorted(path.glob("*.jsonl"))
    if path.suffix == ".json":
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except ValueError as e:
            raise TraceParseError(path, getattr(e, "lineno", 1), f"bad manifest: {e}") from e
        if not isinstance(manifest, dict) or not isinstance(manifest.get("traces"), list):
            raise TraceParseError(path, 1, "manifest must hold a 'traces' list")
        return [path.parent / entry["file"] for entry in manifest["traces"]]
    return [path]


def read_traces(path: str | Path, expected_config_hash: Optional[str] = None) -> list[RolloutTrace]:
    """Read every trace ``discover_traces`` finds under ``path``."""
    files = discover_traces(path)
    if not files:
        logger.warning(f"No trace files found under {path}")
    return [read_trace(file, expected_config_hash) for file in files]

"""Trace, manifest and report files."""

from chunk_artifacts.io.reports import read_report, read_steering_report, write_report
from chunk_artifacts.io.traces import (
    FORMAT_VERSION,
    TraceHeader,
    discover_traces,
    dumps_trace,
    read_header,
    read_trace,
    read_traces,
    write_batch,
    write_manifest,
    write_trace,
)

__all__ = [
    "FORMAT_VERSION",
    "TraceHeader",
    "discover_traces",
    "dumps_trace",
    "read_header",
    "read_report",
    "read_steering_report",
    "read_trace",
    "read_traces",
    "write_batch",
    "write_manifest",
    "write_report",
    "write_trace",
]

"""Experiment runners for outcome association, noise scans, direction search and steering."""

from chunk_artifacts.experiments.association import analyze_traces, run_outcome_association
from chunk_artifacts.experiments.calibration import calibrate_slip_threshold
from chunk_artifacts.experiments.directions import (
    artifact_gradient,
    null_direction,
    run_alpha_sweep,
    run_direction_experiment,
    search_direction,
    stitch_jacobian,
)
from chunk_artifacts.experiments.noise_scan import run_decomposition, run_noise_scan
from chunk_artifacts.experiments.steering import (
    TrajectorySteeringPlan,
    aggregate_reports,
    run_trajectory_steering,
)

__all__ = [
    "TrajectorySteeringPlan",
    "aggregate_reports",
    "analyze_traces",
    "artifact_gradient",
    "calibrate_slip_threshold",
    "null_direction",
    "run_alpha_sweep",
    "run_decomposition",
    "run_direction_experiment",
    "run_noise_scan",
    "run_outcome_association",
    "run_trajectory_steering",
    "search_direction",
    "stitch_jacobian",
]

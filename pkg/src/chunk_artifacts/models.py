"""Pydantic result models shared by the statistics, experiment runners and report writers."""

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, model_validator

Sidedness = Literal["two_sided", "greater"]


class IntervalEstimate(BaseModel):
    """Point estimate with a confidence interval."""

    point: float = Field(..., description="Point estimate")
    lo: float = Field(..., description="Lower bound")
    hi: float = Field(..., description="Upper bound")
    level: float = Field(..., gt=0.0, lt=1.0, description="Confidence level")
    method: Literal["bootstrap_percentile", "wilson"] = Field(..., description="Interval method")
    degenerate: bool = Field(default=False, description="Interval collapsed to a point")

    @model_validator(mode="after")
    def _ordered(self) -> "IntervalEstimate":
        if self.lo > self.hi:
            raise ValueError(f"interval lower bound {self.lo} exceeds upper bound {self.hi}")
        if self.method == "wilson" and not self.lo <= self.point <= self.hi:
            raise ValueError("wilson interval must contain its point estimate")
        return self

    @property
    def width(self) -> float:
        return self.hi - self.lo


class PermutationResult(BaseModel):
    """Two-sample permutation test of mean(b) - mean(a)."""

    observed_delta: float = Field(..., description="mean(group_b) - mean(group_a)")
    p_value: float = Field(..., ge=0.0, le=1.0, description="Permutation p-value")
    n_permutations: int = Field(..., ge=1, description="Permutations drawn or enumerated")
    sidedness: Literal["two_sided", "greater"] = Field(..., description="Alternative hypothesis")
    exact: bool = Field(default=False, description="All label assignments were enumerated")
    degenerate: bool = Field(default=False, description="Pooled values were all identical")
    n_a: int = Field(..., ge=1, description="Size of group a")
    n_b: int = Field(..., ge=1, description="Size of group b")


class GroupReport(BaseModel):
    """Per-arm success rate and episode contrast with intervals."""

    arm: str = Field(..., description="Arm label")
    n: int = Field(..., ge=0, description="Episodes included")
    success_rate: Optional[IntervalEstimate] = Field(default=None, description="Wilson interval")
    contrast_mean: Optional[IntervalEstimate] = Field(
        default=None, description="Bootstrap interval of the mean episode contrast"
    )
    episode_ids: list[int] = Field(default_factory=list, description="Episode ids, ascending")
    successes: list[bool] = Field(default_factory=list, description="Per-episode outcome")
    contrasts: list[float] = Field(default_factory=list, description="Per-episode contrast")
    n_excluded: int = Field(default=0, ge=0, description="Episodes dropped as undefined")
    regimes: list[str] = Field(default_factory=list, description="Scene regimes pooled")
    flags: list[str] = Field(default_factory=list, description="Warnings attached to the arm")

    @model_validator(mode="after")
    def _consistent(self) -> "GroupReport":
        if not self.n == len(self.contrasts) == len(self.successes) == len(self.episode_ids):
            raise ValueError("n must equal the number of raw per-episode values")
        return self


class AssociationRow(BaseModel):
    """Success vs failure contrast comparison under one control window."""

    control: str
    n_success: int = Field(..., ge=0)
    n_failure: int = Field(..., ge=0)
    success_mean: Optional[float] = None
    failure_mean: Optional[float] = None
    delta: Optional[float] = Field(default=None, description="failure mean - success mean")
    test: Optional[PermutationResult] = None
    applicable: bool = Field(default=True, description="Both outcome groups were present")
    n_excluded: int = Field(default=0, ge=0, description="Episodes with an undefined window")


class ProfileRow(BaseModel):
    """Matched-horizon mean jerk per phase for one outcome group."""

    group: Literal["success", "failure"]
    mean_jerk_by_phase: list[Optional[float]]
    counts_by_phase: list[int]


class TimeCourseRow(BaseModel):
    """Matched-horizon mean jerk per timestep for one outcome group."""

    group: Literal["success", "failure"]
    timesteps: list[int]
    mean_jerk: list[float]
    boundary_timesteps: list[int]
    n_traces: int


class AssociationReport(BaseModel):
    """Outcome association between episode contrast and success."""

    n_episodes: int
    n_success: int
    rows: list[AssociationRow] = Field(default_factory=list)
    matched_horizon: Optional[int] = None
    profiles: list[ProfileRow] = Field(default_factory=list)
    time_courses: list[TimeCourseRow] = Field(default_factory=list)
    flags: list[str] = Field(default_factory=list)
    decisions: dict[str, Any] = Field(default_factory=dict)


class ContextScan(BaseModel):
    """Spread of first-boundary artifacts over noise draws at one frozen context."""

    context_id: str
    contrasts: list[float]
    btjs: list[float]
    contrast_std: float = Field(..., ge=0.0)
    btj_std: float = Field(..., ge=0.0)
    reference_contrast: Optional[float] = Field(
        default=None, description="Artifact of the noise the recorded rollout actually used"
    )
    reference_btj: Optional[float] = None
    n_invalid: int = Field(default=0, ge=0)


class ScanResult(BaseModel):
    """Fixed-context noise scan."""

    vary: str = Field(..., description="Which chunk noise was redrawn: z0, z1 or both")
    n_samples: int = Field(..., ge=1)
    contexts: list[ContextScan]
    mean_contrast_std: IntervalEstimate
    mean_btj_std: IntervalEstimate
    n_invalid: int = Field(default=0, ge=0)
    decisions: dict[str, Any] = Field(default_factory=dict)


class DecompositionRow(BaseModel):
    """Artifact spread when only some of the chunk noises vary."""

    condition: Literal["vary_z0", "vary_z1", "vary_both"]
    btj_std: float = Field(..., ge=0.0)
    contrast_std: float = Field(..., ge=0.0)
    n_samples: int = Field(..., ge=1)
    n_contexts: int = Field(..., ge=1)


class DecompositionResult(BaseModel):
    """All decomposition conditions plus the gap to quadrature additivity."""

    rows: list[DecompositionRow]
    btj_quadrature_gap: float = Field(
        ..., description="std(both) - sqrt(std(z0)^2 + std(z1)^2) for BTJ"
    )
    contrast_quadrature_gap: float
    n_invalid: int = Field(default=0, ge=0)
    decisions: dict[str, Any] = Field(default_factory=dict)


class DirectionRecord(BaseModel):
    """Serializable summary of a selected steering direction."""

    direction_id: str
    context_id: str
    candidate_index: int = Field(..., ge=0)
    selection_score: float = Field(..., ge=0.0)
    scores: list[Optional[float]] = Field(default_factory=list)
    degenerate: bool = False
    n_invalid: int = Field(default=0, ge=0)


class SweepResult(BaseModel):
    """Artifact response along one direction over a grid of steering magnitudes."""

    context_id: str
    direction_id: str
    alpha_grid: list[float]
    btj: list[float]
    contrast: list[float]
    r_btj: Optional[float] = None
    r_contrast: Optional[float] = None
    btj_range: float = Field(..., ge=0.0)
    contrast_range: float = Field(..., ge=0.0)
    excluded_alphas: list[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _sorted(self) -> "SweepResult":
        if self.alpha_grid != sorted(self.alpha_grid):
            raise ValueError("alpha grid must be ascending")
        return self


class DirectionReport(BaseModel):
    """Direction search and alpha sweeps over several contexts."""

    directions: list[DirectionRecord]
    sweeps: list[SweepResult]
    mean_abs_r_btj: Optional[float] = None
    mean_abs_r_contrast: Optional[float] = None
    mean_contrast_range: Optional[float] = None
    decisions: dict[str, Any] = Field(default_factory=dict)


class SteeringReport(BaseModel):
    """Trajectory-level steering arms."""

    preset: str
    groups: list[GroupReport]
    contrast_ordering: Optional[bool] = Field(
        default=None, description="good < baseline < bad on mean contrast"
    )
    success_ordering: Optional[bool] = Field(
        default=None, description="good > baseline > bad on success rate"
    )
    n_fallback: int = Field(default=0, ge=0, description="Episodes with degenerate search")
    decisions: dict[str, Any] = Field(default_factory=dict)


class CalibrationResult(BaseModel):
    """Baseline success rate per candidate slip threshold."""

    target_success: float = Field(..., ge=0.0, le=1.0)
    thresholds: list[float]
    success_rates: list[float]
    chosen_threshold: float
    chosen_success: float
    n_episodes: int = Field(..., ge=1, description="Episodes per threshold, shared across thresholds")


class ReportEnvelope(BaseModel):
    """Outer shell of every structured report file."""

    tool_version: str
    report_type: str
    config: dict[str, Any]
    config_hash: str
    report: dict[str, Any]

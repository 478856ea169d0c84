"""Run configuration for chunk-artifacts."""

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from chunk_artifacts.env.testbed import SCENE_PRESETS, EnvConfig
from chunk_artifacts.errors import ConfigError
from chunk_artifacts.logging import parse_level
from chunk_artifacts.policy.generator import PolicyConfig

DEFAULT_ALPHA_GRID = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0]
DEFAULT_CONTROLS = ["all", "contact_free", "contact_free_first_n"]
ARMS = ("baseline", "good", "bad")
RUNTIME_KEYS = ("output_dir", "workers", "log_level")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnvSection(_Section):
    """Scene preset plus field overrides."""

    preset: str = Field(default="headroom", description="Scene preset: headroom, ceiling or floor")
    overrides: dict[str, Any] = Field(default_factory=dict, description="EnvConfig field overrides")

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, value: str) -> str:
        if value not in SCENE_PRESETS:
            raise ValueError(f"unknown preset '{value}', choose from {sorted(SCENE_PRESETS)}")
        return value

    def build(self) -> EnvConfig:
        unknown = set(self.overrides) - set(EnvConfig.model_fields)
        if unknown:
            raise ConfigError(f"env.overrides.{sorted(unknown)[0]}", "not an environment field")
        try:
            return EnvConfig.from_preset(self.preset, **self.overrides)
        except ValidationError as e:
            raise _config_error(e, prefix="env.overrides") from e


class RolloutSection(_Section):
    """Batch rollouts without intervention."""

    n_episodes: int = Field(default=70, ge=1, description="Episodes to roll out")


class AssociationSection(_Section):
    """Outcome association between episode contrast and success."""

    n_episodes: int = Field(default=70, ge=1, description="Episodes when rolling out fresh")
    controls: list[Literal["all", "contact_free", "contact_free_first_n"]] = Field(
        default_factory=lambda: list(DEFAULT_CONTROLS), description="Control windows"
    )
    first_n: int = Field(default=50, ge=1, description="N of the first-N contact-free window")
    guard_margin: int = Field(default=2, ge=0, description="Steps excluded around contact changes")
    n_perm: int = Field(default=20_000, ge=1, description="Monte Carlo permutations")
    sidedness: Literal["greater", "two_sided"] = Field(
        default="greater", description="Alternative of the failure-vs-success test"
    )


class ScanSection(_Section):
    """Fixed-context noise scan."""

    n_contexts: int = Field(default=16, ge=1, description="Frozen contexts")
    n_samples: int = Field(default=24, ge=1, description="Noise draws per context")
    vary: Literal["z0", "z1", "both"] = Field(default="z1", description="Which chunk noise varies")
    pool_episodes: int = Field(default=4, ge=1, description="Baseline rollouts feeding contexts")
    selection_rule: Literal["stratified", "first"] = Field(default="stratified")
    n_boot: int = Field(default=10_000, ge=100, description="Bootstrap resamples over contexts")
    level: float = Field(default=0.95, gt=0, lt=1, description="Confidence level")


class DecompositionSection(_Section):
    """z0 / z1 / both decomposition."""

    n_contexts: int = Field(default=2, ge=1)
    n_samples: int = Field(default=5, ge=2, description="Samples per condition")
    pool_episodes: int = Field(default=4, ge=1)
    selection_rule: Literal["stratified", "first"] = Field(default="stratified")


class DirectionSection(_Section):
    """Random direction search and alpha sweep."""

    n_contexts: int = Field(default=4, ge=1)
    n_directions: int = Field(default=12, ge=1, description="Random candidate directions")
    epsilon: float = Field(default=0.5, gt=0, description="Probe offset for scoring")
    alpha_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_ALPHA_GRID))
    metric: Literal["contrast", "btj"] = Field(default="contrast", description="Scored artifact")
    pool_episodes: int = Field(default=4, ge=1)
    selection_rule: Literal["stratified", "first"] = Field(default="stratified")

    @field_validator("alpha_grid")
    @classmethod
    def _grid(cls, value: list[float]) -> list[float]:
        if 0.0 not in value:
            raise ValueError("alpha grid must contain 0")
        return sorted(set(value))


class SteeringSection(_Section):
    """Trajectory-level steering arms."""

    arms: list[Literal["baseline", "good", "bad"]] = Field(default_factory=lambda: list(ARMS))
    n_episodes_per_arm: int = Field(default=50, ge=1)
    alpha_magnitude: float = Field(default=0.5, gt=0, description="|alpha| applied per chunk")
    warmup_boundaries: int = Field(default=2, ge=1, description="Unsteered boundaries first")
    research_each_boundary: bool = Field(default=False, description="Re-search at every boundary")
    n_directions: int = Field(default=12, ge=1)
    epsilon: float = Field(default=0.5, gt=0)
    metric: Literal["contrast", "btj"] = Field(default="contrast")
    n_boot: int = Field(default=10_000, ge=100)
    level: float = Field(default=0.95, gt=0, lt=1)
    episode_offset: int = Field(default=0, ge=0, description="First episode id")

    @field_validator("arms")
    @classmethod
    def _unique(cls, value: list[str]) -> list[str]:
        if not value or len(set(value)) != len(value):
            raise ValueError("arms must be a nonempty list without repeats")
        return value


class CalibrationSection(_Section):
    """Slip-threshold sweep toward a target baseline success rate."""

    target_success: float = Field(default=0.7, ge=0, le=1, description="Target baseline success")
    thresholds: list[float] = Field(
        default_factory=lambda: [0.4, 0.45, 0.5, 0.55, 0.6], description="Candidate slip thresholds"
    )
    n_episodes: int = Field(default=100, ge=1, description="Episodes per threshold")


class AggregateSection(_Section):
    """Pooling of steering reports."""

    n_boot: int = Field(default=10_000, ge=100)
    level: float = Field(default=0.95, gt=0, lt=1)


class RunConfig(BaseModel):
    """Effective configuration of a run; echoed into every output."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0, description="Root seed")
    stride: int = Field(default=5, ge=1, description="Replanning stride K")
    workers: int = Field(default=1, ge=1, description="Parallel episode workers")
    output_dir: str = Field(default="results", description="Output directory")
    log_level: str = Field(default="INFO", description="Logging level")
    env: EnvSection = Field(default_factory=EnvSection)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    rollout: RolloutSection = Field(default_factory=RolloutSection)
    association: AssociationSection = Field(default_factory=AssociationSection)
    scan: ScanSection = Field(default_factory=ScanSection)
    decomposition: DecompositionSection = Field(default_factory=DecompositionSection)
    direction: DirectionSection = Field(default_factory=DirectionSection)
    steering: SteeringSection = Field(default_factory=SteeringSection)
    calibration: CalibrationSection = Field(default_factory=CalibrationSection)
    aggregate: AggregateSection = Field(default_factory=AggregateSection)

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        parse_level(value)
        return value.strip().upper()

    @model_validator(mode="after")
    def _stride_fits(self) -> "RunConfig":
        if self.stride > self.policy.horizon:
            raise ConfigError("stride", f"K={self.stride} exceeds horizon H={self.policy.horizon}")
        if self.stride < 4:
            raise ConfigError("stride", "K must be >= 4 for the boundary-interior contrast")
        return self

    @classmethod
    def from_dict(cls, data: Optional[dict[str, Any]]) -> "RunConfig":
        """Validate a plain mapping, converting validation errors to ConfigError."""
        try:
            return cls(**(data or {}))
        except ValidationError as e:
            raise _config_error(e) from e

    @classmethod
    def from_yaml(cls, path: str | Path) -> "RunConfig":
        """Load configuration from YAML file."""
        try:
            with open(path, "r") as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError("<root>", f"{path} is not valid YAML: {e}") from e
        if data is not None and not isinstance(data, dict):
            raise ConfigError("<root>", f"{path} does not hold a mapping")
        return cls.from_dict(data)

    @classmethod
    def from_preset(cls, name: str) -> "RunConfig":
        """Load a packaged preset such as ``paper-goal3``."""
        return cls.from_dict(load_preset(name))

    def to_yaml(self, path: str | Path) -> None:
        """Save configuration to YAML file."""
        with open(path, "w") as f:
            yaml.safe_dump(self.effective(), f, default_flow_style=False, indent=2, sort_keys=True)

    def effective(self) -> dict[str, Any]:
        return self.model_dump(mode="json")

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the effective config, runtime-only keys excluded."""
        relevant = {k: v for k, v in self.effective().items() if k not in RUNTIME_KEYS}
        canonical = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def env_config(self) -> EnvConfig:
        env = self.env.build()
        env.check_stride(self.stride)
        return env

    def update_from_dict(self, updates: dict[str, Any]) -> "RunConfig":
        """Return a new config with nested ``updates`` merged over the current values."""
        return RunConfig.from_dict(deep_merge(self.effective(), updates))

    def with_overrides(self, assignments: list[str]) -> "RunConfig":
        """Apply ``section.key=value`` assignments; values are parsed as YAML scalars."""
        return self.update_from_dict(parse_assignments(assignments))


def parse_assignments(assignments: list[str]) -> dict[str, Any]:
    """Turn ``["a.b=1", "c=x"]`` into ``{"a": {"b": 1}, "c": "x"}``."""
    updates: dict[str, Any] = {}
    for item in assignments:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(item, "override must look like section.key=value")
        node = updates
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(key, "conflicts with another override")
            node = child
        try:
            node[parts[-1]] = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as e:
            raise ConfigError(key, f"value is not valid YAML: {e}") from e
    return updates


def load_preset(name: str) -> dict[str, Any]:
    """Read a packaged ``<name>.preset`` YAML file."""
    resource = resources.files("chunk_artifacts") / "presets" / f"{name}.preset"
    if not resource.is_file():
        available = sorted(
            p.name.removesuffix(".preset")
            for p in (resources.files("chunk_artifacts") / "presets").iterdir()
            if p.name.endswith(".preset")
        )
        raise ConfigError("preset", f"unknown preset '{name}', available: {available}")
    data = yaml.safe_load(resource.read_text(encoding="utf-8"))
    return data or {}


def deep_merge(base: dict[str, Any], updates: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != "overrides":
            merged[key] = deep_merge(merged[key], value)
        elif key == "overrides" and isinstance(value, dict):
            merged[key] = {**merged.get(key, {}), **value}
        else:
            merged[key] = value
    return merged


def _config_error(error: ValidationError, prefix: str = "") -> ConfigError:
    first = error.errors()[0]
    loc = ".".join(str(part) for part in first.get("loc", ()))
    key = ".".join(part for part in (prefix, loc) if part) or "<root>"
    return ConfigError(key, first.get("msg", "invalid value"))

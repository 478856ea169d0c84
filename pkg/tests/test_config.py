"""Tests for run configuration, presets and overrides."""

import pytest

from chunk_artifacts.config import RunConfig, deep_merge, load_preset, parse_assignments
from chunk_artifacts.errors import ConfigError

pytestmark = pytest.mark.unit


def test_defaults_are_valid():
    config = RunConfig()
    assert config.stride == 5
    assert config.direction.alpha_grid == [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0]
    assert config.env_config().regime == "headroom"


def test_hash_ignores_runtime_keys():
    base = RunConfig()
    runtime = RunConfig(output_dir="elsewhere", workers=4, log_level="DEBUG")
    assert base.config_hash() == runtime.config_hash()
    assert base.config_hash() != RunConfig(seed=1).config_hash()


def test_parse_assignments_builds_nested_values():
    updates = parse_assignments(["scan.n_samples=8", "env.overrides.slip_threshold=0.3", "seed=2"])
    assert updates == {"scan": {"n_samples": 8}, "env": {"overrides": {"slip_threshold": 0.3}}, "seed": 2}


@pytest.mark.parametrize("item", ["no_equals", "=5", "a=[1,"])
def test_parse_assignments_rejects_malformed(item):
    with pytest.raises(ConfigError):
        parse_assignments([item])


def test_deep_merge_keeps_siblings():
    merged = deep_merge(
        {"scan": {"n_samples": 4, "vary": "z0"}, "env": {"overrides": {"dt": 0.1}}},
        {"scan": {"n_samples": 8}, "env": {"overrides": {"max_steps": 100}}},
    )
    assert merged["scan"] == {"n_samples": 8, "vary": "z0"}
    assert merged["env"]["overrides"] == {"dt": 0.1, "max_steps": 100}


def test_overrides_return_a_new_config():
    config = RunConfig()
    changed = config.with_overrides(["steering.alpha_magnitude=0.25"])
    assert changed.steering.alpha_magnitude == 0.25
    assert config.steering.alpha_magnitude == 0.5


def test_validation_error_names_the_key():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict({"scan": {"n_samples": 0}})
    assert info.value.key == "scan.n_samples"


@pytest.mark.parametrize(
    "data, key",
    [
        ({"stride": 11}, "stride"),
        ({"stride": 3}, "stride"),
        ({"direction": {"alpha_grid": [0.5, 1.0]}}, "direction.alpha_grid"),
        ({"steering": {"arms": ["good", "good"]}}, "steering.arms"),
        ({"log_level": "LOUD"}, "log_level"),
    ],
)
def test_invalid_values(data, key):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict(data)
    assert info.value.key == key


def test_unknown_env_override():
    config = RunConfig.from_dict({"env": {"overrides": {"gravity": 9.8}}})
    with pytest.raises(ConfigError) as info:
        config.env_config()
    assert info.value.key == "env.overrides.gravity"


def test_episode_limit_must_cover_the_stride():
    config = RunConfig.from_dict({"env": {"overrides": {"max_steps": 10}}})
    with pytest.raises(ConfigError):
        config.env_config()


def test_yaml_round_trip(tmp_path):
    config = RunConfig.from_dict({"seed": 7, "scan": {"vary": "both"}})
    path = tmp_path / "run.yaml"
    config.to_yaml(path)
    assert RunConfig.from_yaml(path) == config


def test_invalid_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("scan: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        RunConfig.from_yaml(path)


@pytest.mark.parametrize("name, regime", [("paper-goal3", "headroom"), ("paper-task8", "floor")])
def test_packaged_presets(name, regime):
    config = RunConfig.from_preset(name)
    assert config.env_config().regime == regime
    assert load_preset(name)["stride"] == 5


def test_unknown_preset():
    with pytest.raises(ConfigError):
        load_preset("missing")

"""Command-line tests run through typer's CliRunner."""

import json

import pytest
from typer.testing import CliRunner

from chunk_artifacts import __version__
from chunk_artifacts.cli import app
from chunk_artifacts.errors import UndefinedContrastError
from chunk_artifacts.io import read_steering_report

runner = CliRunner()
QUIET = ["--log-level", "WARNING"]


def payload(result) -> dict:
    """The JSON object a command prints on stdout."""
    lines = [line for line in result.stdout.splitlines() if line.startswith("{")]
    assert lines, result.output
    return json.loads(lines[-1])


@pytest.mark.unit
class TestConfigCommand:
    def test_prints_effective_config(self):
        result = runner.invoke(app, ["config", "--seed", "3", "--set", "scan.n_samples=8"])
        assert result.exit_code == 0, result.output
        data = payload(result)
        assert data["tool_version"] == __version__
        assert data["config"]["seed"] == 3
        assert data["config"]["scan"]["n_samples"] == 8
        assert len(data["config_hash"]) == 64

    def test_output_dir_does_not_change_the_hash(self, tmp_path):
        first = payload(runner.invoke(app, ["config", "--out", str(tmp_path / "a")]))
        second = payload(runner.invoke(app, ["config", "--out", str(tmp_path / "b")]))
        assert first["config_hash"] == second["config_hash"]

    def test_preset_then_flags(self):
        data = payload(runner.invoke(app, ["config", "--preset", "paper-task8", "--seed", "9"]))
        assert data["config"]["env"]["preset"] == "floor"
        assert data["config"]["decomposition"]["n_samples"] == 8
        assert data["config"]["seed"] == 9

    def test_config_file_and_save(self, tmp_path):
        source = tmp_path / "run.yaml"
        source.write_text("stride: 4\nscan:\n  n_contexts: 3\n", encoding="utf-8")
        saved = tmp_path / "saved.yaml"
        result = runner.invoke(app, ["config", "--config", str(source), "--save", str(saved)])
        assert result.exit_code == 0, result.output
        assert payload(result)["config"]["scan"]["n_contexts"] == 3
        assert "stride: 4" in saved.read_text(encoding="utf-8")

    @pytest.mark.parametrize(
        "args",
        [
            ["--set", "scan.bogus=1"],
            ["--set", "stride=11"],
            ["--set", "stride=3"],
            ["--preset", "nonexistent"],
            ["--set", "env.preset=tropical"],
        ],
    )
    def test_invalid_config_exits_2(self, args):
        assert runner.invoke(app, ["config", *args]).exit_code == 2

    def test_version(self):
        result = runner.invoke(app, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.stdout


@pytest.mark.integration
class TestRunCommands:
    def test_rollout_then_analyze(self, tmp_path):
        result = runner.invoke(app, ["rollout", "-n", "2", "--out", str(tmp_path), *QUIET])
        assert result.exit_code == 0, result.output
        data = payload(result)
        assert data["n_episodes"] == 2
        assert (tmp_path / "traces" / "manifest.json").is_file()

        result = runner.invoke(app, ["analyze", str(tmp_path / "traces"), "--out", str(tmp_path), *QUIET])
        assert result.exit_code == 0, result.output
        rows = payload(result)["rows"]
        assert [row["control"] for row in rows] == ["all", "contact_free", "contact_free_first_n"]
        assert (tmp_path / "association.json").is_file()
        assert (tmp_path / "association_time_course.csv").is_file()

    def test_rollout_is_reproducible(self, tmp_path):
        args = ["rollout", "-n", "2", "--seed", "4", "--out", str(tmp_path), *QUIET]
        runner.invoke(app, args)
        first = {p.name: p.read_bytes() for p in (tmp_path / "traces").iterdir()}
        runner.invoke(app, args)
        second = {p.name: p.read_bytes() for p in (tmp_path / "traces").iterdir()}
        assert first == second

    def test_contact_control_on_external_trace_exits_3(self, tmp_path, minimal_trace_path):
        result = runner.invoke(
            app, ["analyze", str(minimal_trace_path), "--controls", "contact_free", "--out", str(tmp_path), *QUIET]
        )
        assert result.exit_code == 3

    def test_missing_trace_file_exits_5(self, tmp_path):
        result = runner.invoke(app, ["analyze", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path), *QUIET])
        assert result.exit_code == 5

    def test_empty_trace_directory_exits_4(self, tmp_path):
        (tmp_path / "empty").mkdir()
        result = runner.invoke(app, ["analyze", str(tmp_path / "empty"), "--out", str(tmp_path), *QUIET])
        assert result.exit_code == 4

    def test_undefined_statistic_exits_4(self, tmp_path, mocker, minimal_trace_path):
        mocker.patch(
            "chunk_artifacts.cli.analyze_traces",
            side_effect=UndefinedContrastError("phase 1 has no samples"),
        )
        result = runner.invoke(app, ["analyze", str(minimal_trace_path), "--out", str(tmp_path), *QUIET])
        assert result.exit_code == 4

    def test_steer_then_aggregate(self, tmp_path):
        settings = [
            "--set", "steering.n_episodes_per_arm=1",
            "--set", "steering.n_directions=2",
            "--set", "steering.n_boot=100",
        ]
        result = runner.invoke(app, ["steer", "--arms", "baseline,bad", *settings, "--out", str(tmp_path), *QUIET])
        assert result.exit_code == 0, result.output
        report = read_steering_report(tmp_path / "steering.json")
        assert [g.arm for g in report.groups] == ["baseline", "bad"]

        steering = str(tmp_path / "steering.json")
        result = runner.invoke(
            app,
            ["aggregate", steering, steering, "--set", "aggregate.n_boot=100", "--out", str(tmp_path), *QUIET],
        )
        assert result.exit_code == 0, result.output
        pooled = read_steering_report(tmp_path / "aggregate.json")
        assert pooled.decisions["pooled_runs"] == 2

    def test_calibrate(self, tmp_path):
        args = ["calibrate", "--set", "calibration.n_episodes=1", "--set", "calibration.thresholds=[0.4]"]
        result = runner.invoke(app, [*args, "--out", str(tmp_path), *QUIET])
        assert result.exit_code == 0, result.output
        assert payload(result)["chosen_threshold"] == 0.4

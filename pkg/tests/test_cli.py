import json

import pytest
from click.testing import CliRunner

from gesturenav.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


class TestRun:
    def test_successful_run_exit_zero(self, runner, scenario_dir, tmp_path):
        trace = tmp_path / "t.jsonl"
        result = runner.invoke(main, [
            "run", str(scenario_dir / "occluded_chairs.json"),
            "--trace", str(trace),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["outcome"] == "Done"
        assert trace.exists()

    def test_failed_run_exit_one(self, runner, scenario_dir):
        result = runner.invoke(main, [
            "run", str(scenario_dir / "foot_occluded.json"),
        ])
        assert result.exit_code == 1
        assert json.loads(result.output)["reason"] == "FootNotVisible"

    def test_figure_rendered(self, runner, scenario_dir, tmp_path):
        fig = tmp_path / "fig.png"
        result = runner.invoke(main, [
            "run", str(scenario_dir / "foot_occluded.json"), "--figure", str(fig),
        ])
        assert result.exit_code == 1
        assert fig.stat().st_size > 0

    def test_invalid_scenario_exit_two(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        result = runner.invoke(main, ["run", str(bad)])
        assert result.exit_code == 2

    def test_missing_file_exit_two(self, runner):
        result = runner.invoke(main, ["run", "no_such.json"])
        assert result.exit_code == 2


class TestReplayAndExport:
    def test_replay_prints_timeline(self, runner, scenario_dir, tmp_path):
        trace = tmp_path / "t.jsonl"
        runner.invoke(main, [
            "run", str(scenario_dir / "occluded_chairs.json"),
            "--trace", str(trace),
        ])
        result = runner.invoke(main, ["replay", str(trace)])
        assert result.exit_code == 0
        assert "ApproachingFinal" in result.output
        assert "terminal: Done" in result.output

    def test_replay_bad_trace_exit_two(self, runner, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        result = runner.invoke(main, ["replay", str(bad)])
        assert result.exit_code == 2

    def test_export_svg(self, runner, scenario_dir, tmp_path):
        trace = tmp_path / "t.jsonl"
        runner.invoke(main, [
            "run", str(scenario_dir / "foot_occluded.json"),
            "--trace", str(trace),
        ])
        out = tmp_path / "out.svg"
        result = runner.invoke(main, [
            "export-svg", str(trace),
            "--scenario-dir", str(scenario_dir), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert out.read_bytes().startswith(b"<?xml")


class TestBatch:
    def test_batch_writes_csv_and_figures(self, runner, scenario_dir, tmp_path):
        single = tmp_path / "specs"
        single.mkdir()
        src = (scenario_dir / "foot_occluded.json").read_text()
        (single / "foot_occluded.json").write_text(src)
        out = tmp_path / "out"
        result = runner.invoke(main, [
            "batch", str(single), "--seeds", "0..2", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        csv_text = (out / "summary.csv").read_text()
        assert "foot_occluded" in csv_text
        assert "FootNotVisible:3" in csv_text
        assert (out / "success_rates.png").stat().st_size > 0
        assert (out / "foot_occluded.png").stat().st_size > 0

    def test_bad_seed_spec_exit_two(self, runner, scenario_dir):
        result = runner.invoke(main, [
            "batch", str(scenario_dir), "--seeds", ",",
        ])
        assert result.exit_code == 2

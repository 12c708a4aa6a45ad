import json
from pathlib import Path

import numpy as np
import pytest

from mapstitch.cli import EXIT_CONFIG, EXIT_DOMINANCE, EXIT_OK, main
from mapstitch.metrics import RunReport
from mapstitch.tum import parse_tum

SCENARIO = "four_submap_gauge"
ARTIFACTS = ["report.json", "trajectory_estimated.txt", "trajectory_ground_truth.txt",
             "events.jsonl", "graph.dot"]


def run_cli(*argv):
    return main(list(argv))


class TestRunCommand:
    def test_writes_all_artifacts(self, tmp_path, capsys):
        code = run_cli("run", SCENARIO, "--deterministic", "--out", str(tmp_path))
        assert code == EXIT_OK
        for name in ARTIFACTS:
            assert (tmp_path / name).is_file(), name
        out = capsys.readouterr().out
        assert "run complete" in out

    def test_report_roundtrips(self, tmp_path):
        run_cli("run", SCENARIO, "--deterministic", "--out", str(tmp_path))
        text = (tmp_path / "report.json").read_text()
        report = RunReport.from_json(text)
        assert report.scenario_name == SCENARIO
        assert report.to_json() == text

    def test_trajectories_parse_back_to_reported_poses(self, tmp_path):
        run_cli("run", SCENARIO, "--deterministic", "--out", str(tmp_path))
        report = RunReport.from_json((tmp_path / "report.json").read_text())
        rows = parse_tum((tmp_path / "trajectory_estimated.txt").read_text())
        assert len(rows) == report.keyframes_retained
        for (ts, pose), reported in zip(rows, report.trajectory["estimated"]):
            assert ts == pytest.approx(reported[1], abs=1e-9)
            assert np.allclose(pose.translation, reported[2:5], rtol=1e-8, atol=1e-6)

    def test_deterministic_reruns_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli("run", SCENARIO, "--deterministic", "--out", str(a))
        run_cli("run", SCENARIO, "--deterministic", "--out", str(b))
        for name in ARTIFACTS:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_scenario_file_input(self, tmp_path):
        gen = tmp_path / "scenario.json"
        assert run_cli("gen-scenario", SCENARIO, "--out", str(gen)) == EXIT_OK
        out = tmp_path / "out"
        assert run_cli("run", str(gen), "--deterministic", "--out", str(out)) == EXIT_OK

    def test_missing_scenario_file_exit_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        code = run_cli("run", str(missing), "--out", str(tmp_path / "o"))
        assert code == EXIT_CONFIG
        assert str(missing) in capsys.readouterr().err

    def test_corrupt_scenario_json_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert run_cli("run", str(bad), "--out", str(tmp_path / "o")) == EXIT_CONFIG

    def test_unknown_field_names_field(self, tmp_path, capsys):
        gen = tmp_path / "scenario.json"
        run_cli("gen-scenario", SCENARIO, "--out", str(gen))
        raw = json.loads(gen.read_text())
        raw["mystery"] = 2
        gen.write_text(json.dumps(raw))
        code = run_cli("run", str(gen), "--out", str(tmp_path / "o"))
        assert code == EXIT_CONFIG
        assert "mystery" in capsys.readouterr().err

    def test_seed_and_threshold_overrides_land_in_report(self, tmp_path):
        run_cli("run", SCENARIO, "--deterministic", "--seed", "42",
                "--strength-threshold", "15.5", "--fail-streak", "4",
                "--out", str(tmp_path))
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["seed"] == 42
        assert report["config"]["rng_seed"] == 42
        assert report["config"]["session"]["strength_threshold"] == 15.5
        assert report["config"]["session"]["fail_streak"] == 4


class TestCompareCommand:
    def test_compare_writes_tables(self, tmp_path, capsys):
        code = run_cli("compare", "indoor_corridor", "--deterministic",
                       "--out", str(tmp_path))
        assert code == EXIT_OK
        for name in ("comparison.txt", "comparison.csv",
                     "report_proposed.json", "report_baseline.json"):
            assert (tmp_path / name).is_file()
        assert "dominance_ok: True" in capsys.readouterr().out

    def test_dominance_failure_gives_exit_4(self, tmp_path, monkeypatch):
        from mapstitch.service import core as service_core
        from mapstitch.service import schemas

        def fake_compare(request):
            return schemas.CompareResponse(
                report_proposed={}, report_baseline={},
                table={}, text="forced\n", csv="metric,baseline,proposed\n",
                dominance_ok=False,
            )

        monkeypatch.setattr(service_core, "compare", fake_compare)
        code = run_cli("compare", SCENARIO, "--out", str(tmp_path))
        assert code == EXIT_DOMINANCE


class TestExportGraph:
    def test_dot_matches_report_graph(self, tmp_path, capsys):
        import re

        run_cli("run", SCENARIO, "--deterministic", "--out", str(tmp_path))
        capsys.readouterr()
        code = run_cli("export-graph", str(tmp_path / "report.json"))
        assert code == EXIT_OK
        dot = capsys.readouterr().out
        report = json.loads((tmp_path / "report.json").read_text())
        assert len(report["graph"]["nodes"]) == 4  # four-submap scenario
        for node in report["graph"]["nodes"]:
            assert f"s{node['id']} " in dot
        assert dot.count(" -- ") == len(report["graph"]["edges"])
        # Edge labels round-trip the reported pair/point/strength numbers.
        labels = re.findall(r's(\d+) -- s(\d+) \[label="F=(\d+),M=(\d+),[^,]+,C=([0-9.]+)"', dot)
        assert len(labels) == len(report["graph"]["edges"])
        by_pair = {(e["submap_a"], e["submap_b"]): e for e in report["graph"]["edges"]}
        for a, b, pairs, points, strength in labels:
            edge = by_pair[(int(a), int(b))]
            assert edge["pair_count"] == int(pairs)
            assert edge["point_count"] == int(points)
            assert edge["strength"] == pytest.approx(float(strength), abs=0.05)
        assert dot == (tmp_path / "graph.dot").read_text()

    def test_single_submap_report_gives_one_node_graph(self, tmp_path, capsys):
        # A clean scenario (no failure windows) keeps a single map.
        gen = tmp_path / "clean.json"
        run_cli("gen-scenario", SCENARIO, "--out", str(gen))
        raw = json.loads(gen.read_text())
        raw["failure_windows"] = []
        gen.write_text(json.dumps(raw))
        run_cli("run", str(gen), "--deterministic", "--out", str(tmp_path / "o"))
        capsys.readouterr()
        assert run_cli("export-graph", str(tmp_path / "o" / "report.json")) == EXIT_OK
        dot = capsys.readouterr().out
        assert dot.count("[label=\"S") == 1
        assert " -- " not in dot

    def test_missing_report_exit_2(self, tmp_path):
        assert run_cli("export-graph", str(tmp_path / "none.json")) == EXIT_CONFIG

    def test_report_without_graph_exit_2(self, tmp_path):
        empty = tmp_path / "empty.json"
        empty.write_text("{}")
        assert run_cli("export-graph", str(empty)) == EXIT_CONFIG


class TestQueryCommand:
    def test_prints_matches(self, capsys):
        code = run_cli("query", "chain_9", "--frame", "170")
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "word_ratio=" in out
        assert "submap" in out


class TestGenScenario:
    def test_stdout_mode(self, capsys):
        assert run_cli("gen-scenario", SCENARIO) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["name"] == SCENARIO

    def test_unknown_name_exit_2(self, tmp_path):
        assert run_cli("gen-scenario", "atlantis", "--out", str(tmp_path / "x.json")) == EXIT_CONFIG

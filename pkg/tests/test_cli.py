import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from trajkd.benchmark import default_config
from trajkd.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def small_config_path(tmp_path):
    cfg = default_config(n_objects=40, n_frames=30)
    path = tmp_path / "config.json"
    path.write_text(cfg.to_json(), encoding="utf-8")
    return str(path)


@pytest.fixture()
def generated(runner, tmp_path, small_config_path):
    out = tmp_path / "bench"
    result = runner.invoke(main, ["generate", "--config", small_config_path,
                                  "--out", str(out), "--json"])
    assert result.exit_code == 0, result.output
    return out


def test_generate_writes_files(generated):
    assert (generated / "benchmark.csv").exists()
    assert (generated / "ground_truth.csv").exists()
    assert (generated / "config.json").exists()
    header = (generated / "benchmark.csv").read_text().splitlines()[0]
    assert header == "object_id,frame,x,y,z"


def test_generate_json_output(runner, tmp_path, small_config_path):
    result = runner.invoke(main, ["generate", "--config", small_config_path,
                                  "--out", str(tmp_path / "b"), "--json"])
    payload = json.loads(result.output)
    assert payload["n_objects"] == 40
    assert payload["frame_range"] == [0, 29]


def test_generate_is_deterministic(runner, tmp_path, small_config_path):
    for name in ("a", "b"):
        result = runner.invoke(main, ["generate", "--config", small_config_path,
                                      "--out", str(tmp_path / name)])
        assert result.exit_code == 0
    assert (tmp_path / "a" / "benchmark.csv").read_bytes() == \
        (tmp_path / "b" / "benchmark.csv").read_bytes()


def test_ingest_smoke(runner, generated):
    result = runner.invoke(main, ["ingest", str(generated / "benchmark.csv"),
                                  "--json"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["n_objects"] == 40
    assert payload["violations"] == []


def test_ingest_missing_file_exit_2(runner):
    result = runner.invoke(main, ["ingest", "/nonexistent.csv"])
    assert result.exit_code == 2


def test_ingest_duplicate_sample_exit_3(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("object_id,frame,x,y,z\na,0,1,2,3\na,0,9,9,9\na,1,1,2,3\n")
    result = runner.invoke(main, ["ingest", str(bad)])
    assert result.exit_code == 3
    assert "duplicate" in result.output


def export_pipeline(runner, tmp_path, seed=7):
    record_path = tmp_path / "pipeline.json"
    result = runner.invoke(main, [
        "export-example-pipeline", "--out", str(record_path),
        "--objects", "40", "--frames", "30", "--seed", str(seed)])
    assert result.exit_code == 0, result.output
    return record_path


def test_export_example_pipeline(runner, tmp_path):
    record_path = export_pipeline(runner, tmp_path)
    record = json.loads(record_path.read_text())
    assert record["format"] == "trajkd-pipeline"
    assert [s["kind"] for s in record["steps"]] == \
        ["filter", "cluster", "cluster", "manual"]


def test_replay_recovers_six_groups(runner, tmp_path, generated):
    record_path = export_pipeline(runner, tmp_path)
    out = tmp_path / "replayed"
    result = runner.invoke(main, [
        "replay", "--pipeline", str(record_path),
        "--data", str(generated / "benchmark.csv"),
        "--out", str(out), "--json"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert len(payload["leaves"]) == 6
    assert payload["skipped_steps"] == []
    assert (out / "knowledge_db.csv").exists()
    assert (out / "replay_report.json").exists()


def test_replay_is_deterministic(runner, tmp_path, generated):
    record_path = export_pipeline(runner, tmp_path)
    outputs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        result = runner.invoke(main, [
            "replay", "--pipeline", str(record_path),
            "--data", str(generated / "benchmark.csv"), "--out", str(out)])
        assert result.exit_code == 0
        outputs.append((out / "knowledge_db.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_replay_override_changes_step(runner, tmp_path, generated):
    record_path = export_pipeline(runner, tmp_path)
    out = tmp_path / "overridden"
    result = runner.invoke(main, [
        "replay", "--pipeline", str(record_path),
        "--data", str(generated / "benchmark.csv"),
        "--override", "s1=spec.value:1000000.0",
        "--out", str(out), "--json"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["leaves"] == {}
    assert set(payload["skipped_steps"]) == {"s2", "s3", "s4"}


def test_replay_strict_exit_4(runner, tmp_path, generated):
    record_path = export_pipeline(runner, tmp_path)
    result = runner.invoke(main, [
        "replay", "--pipeline", str(record_path),
        "--data", str(generated / "benchmark.csv"),
        "--override", "s1=spec.value:1000000.0",
        "--strict", "--out", str(tmp_path / "x")])
    assert result.exit_code == 4


def test_replay_bad_pipeline_exit_2(runner, tmp_path, generated):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    result = runner.invoke(main, [
        "replay", "--pipeline", str(bad),
        "--data", str(generated / "benchmark.csv"),
        "--out", str(tmp_path / "x")])
    assert result.exit_code == 2


def replayed_kdb(runner, tmp_path, generated, name="kdb"):
    record_path = export_pipeline(runner, tmp_path)
    out = tmp_path / name
    result = runner.invoke(main, [
        "replay", "--pipeline", str(record_path),
        "--data", str(generated / "benchmark.csv"), "--out", str(out)])
    assert result.exit_code == 0
    return out / "knowledge_db.csv"


def test_compare_self_perfect(runner, tmp_path, generated):
    kdb = replayed_kdb(runner, tmp_path, generated)
    result = runner.invoke(main, ["compare", str(kdb), str(kdb), "--json"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["agreement"] == 1.0
    assert payload["ari"] == 1.0


def test_compare_human_output(runner, tmp_path, generated):
    kdb = replayed_kdb(runner, tmp_path, generated)
    result = runner.invoke(main, ["compare", str(kdb), str(kdb)])
    assert "pairwise agreement: 1.000000" in result.output


def test_stats_command(runner, tmp_path, generated):
    kdb = replayed_kdb(runner, tmp_path, generated)
    result = runner.invoke(main, [
        "stats", "--data", str(generated / "benchmark.csv"),
        "--kdb", str(kdb), "--feature", "mean_curvilinear_speed", "--json"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    total = sum(g["count"] for g in payload["groups"])
    assert total == 40


def test_stats_json_feature_spec(runner, tmp_path, generated):
    kdb = replayed_kdb(runner, tmp_path, generated)
    spec = json.dumps({"kind": "plane_angle", "plane_normal": [0, 1, 0],
                       "zero_fallback": True})
    result = runner.invoke(main, [
        "stats", "--data", str(generated / "benchmark.csv"),
        "--kdb", str(kdb), "--feature", spec])
    assert result.exit_code == 0, result.output
    assert "plane_angle per group" in result.output


def test_compare_against_ground_truth(runner, tmp_path, generated):
    kdb = replayed_kdb(runner, tmp_path, generated)
    result = runner.invoke(main, [
        "compare", str(kdb), str(generated / "ground_truth.csv"), "--json"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["agreement"] >= 0.95


def test_stats_bad_feature_exit_3(runner, tmp_path, generated):
    kdb = replayed_kdb(runner, tmp_path, generated)
    result = runner.invoke(main, [
        "stats", "--data", str(generated / "benchmark.csv"),
        "--kdb", str(kdb), "--feature", "not_a_feature"])
    assert result.exit_code == 3

"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a [PASS]/[FAIL] line (visible with ``pytest -s`` or in the
captured output), so the suite doubles as a release checklist:

    pytest tests/test_acceptance.py -s
"""

import functools
import itertools
import json
import math
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from trajkd.benchmark import default_config, generate
from trajkd.cli import main as cli_main
from trajkd.clustering import FcmConfig, fcm_fit, hard_assign
from trajkd.data import Selection, export_table, ingest_table
from trajkd.evaluation import compare_kdbs, compare_labelings
from trajkd.features import (
    FeatureSpec,
    build_feature_matrix,
    mean_curvilinear_speed,
    path_length,
    plane_angle,
    rotated_projection_range,
)
from trajkd.filters import (
    CharacteristicFilter,
    SpatialBoxFilter,
    SpatialThresholdFilter,
    TemporalFilter,
    apply_filter,
    preview_filter,
)
from trajkd.pipeline import KnowledgeDatabase, Session, replay
from trajkd.service import ServiceConfig, create_app

from .conftest import random_trajectory


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[FAIL] {name}")
                raise
            print(f"\n[PASS] {name}")
        return wrapper
    return decorate


@criterion("FCM invariant suite: 100 random fits, row sums / monotone "
           "objective / bounded centers / bit-identical refit, < 30 s")
def test_fcm_invariant_suite():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    for i in range(100):
        n = int(rng.integers(4, 501))
        d = int(rng.integers(1, 6))
        c = int(rng.integers(1, 5))
        c = min(c, n)
        X = rng.normal(0.0, rng.uniform(0.5, 20.0), size=(n, d))
        cfg = FcmConfig(c=c, seed=int(rng.integers(2 ** 63)))
        fit = fcm_fit(X, cfg)

        row_sums = fit.memberships.sum(axis=1)
        assert np.all(np.abs(row_sums - 1.0) <= 1e-9)
        assert np.all(np.diff(fit.objective) <= 1e-12)
        assert np.all(fit.centers >= X.min(axis=0) - 0.0)
        assert np.all(fit.centers <= X.max(axis=0) + 0.0)

        refit = fcm_fit(X, cfg)
        assert np.array_equal(fit.memberships, refit.memberships)
        assert np.array_equal(fit.centers, refit.centers)
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"invariant suite took {elapsed:.1f}s"


@criterion("FCM recovery: two 10-sigma-separated blobs, ARI = 1.0 on "
           "100/100 seeds, < 10 s")
def test_fcm_blob_recovery():
    started = time.perf_counter()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        sigma = 1.0
        offset = rng.normal(0.0, 1.0, size=2)
        offset = 10.0 * sigma * offset / np.linalg.norm(offset)
        a = rng.normal(0.0, sigma, size=(100, 2))
        b = rng.normal(0.0, sigma, size=(100, 2)) + offset
        X = np.vstack([a, b])
        truth = {str(i): "a" if i < 100 else "b" for i in range(200)}
        fit = fcm_fit(X, FcmConfig(c=2, seed=seed))
        got = {str(i): f"c{l}" for i, l in enumerate(hard_assign(fit))}
        assert compare_labelings(truth, got).ari == pytest.approx(1.0)
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"blob recovery took {elapsed:.1f}s"


@criterion("Feature oracle equivalence: speed / path length / plane angle "
           "vs brute force within 1e-9; 90-degree rotation swap within 1e-9")
def test_feature_oracles():
    def speed_oracle(points):
        return sum(math.dist(p, q) for p, q in zip(points[:-1], points[1:])) \
            / (len(points) - 1)

    def length_oracle(points):
        return sum(math.dist(p, q) for p, q in zip(points[:-1], points[1:]))

    def angle_oracle(start, end, normal):
        d = [e - s for s, e in zip(start, end)]
        dn = math.sqrt(sum(v * v for v in d))
        nn = math.sqrt(sum(v * v for v in normal))
        dot = sum(a * b / nn for a, b in zip(d, normal))
        return math.degrees(math.asin(min(1.0, abs(dot) / dn)))

    rng = np.random.default_rng(4096)
    for _ in range(1000):
        traj = random_trajectory(rng, n_min=2, n_max=25)
        pts = traj.positions.tolist()
        assert mean_curvilinear_speed(traj) == pytest.approx(
            speed_oracle(pts), abs=1e-9)
        assert path_length(traj) == pytest.approx(length_oracle(pts), abs=1e-9)
        normal = rng.normal(size=3)
        if np.linalg.norm(normal) > 0 and not np.array_equal(pts[0], pts[-1]):
            d = np.asarray(pts[-1]) - np.asarray(pts[0])
            if np.linalg.norm(d) > 0:
                assert plane_angle(traj, normal) == pytest.approx(
                    angle_oracle(pts[0], pts[-1], normal.tolist()), abs=1e-9)
        swap_a = rotated_projection_range(traj, 90.0, "y", "xz", "x")
        swap_b = rotated_projection_range(traj, 0.0, "y", "xz", "z")
        assert swap_a == pytest.approx(swap_b, abs=1e-9)


def _random_filter_spec(rng):
    kind = rng.integers(0, 4)
    axes = ["x", "y", "z"]
    statistics = ["centroid", "start", "end", "all_points", "any_point"]
    comparator = [">=", "<="][rng.integers(0, 2)]
    if kind == 0:
        return SpatialThresholdFilter(
            axis=axes[rng.integers(0, 3)], comparator=comparator,
            value=float(rng.uniform(-60, 60)),
            statistic=statistics[rng.integers(0, 5)])
    if kind == 1:
        lo = float(rng.uniform(-60, 30))
        return SpatialBoxFilter(
            x=(lo, lo + float(rng.uniform(0, 60))),
            y=(None, float(rng.uniform(-20, 60))),
            statistic=statistics[rng.integers(0, 5)])
    if kind == 2:
        lo = int(rng.integers(0, 300))
        return TemporalFilter(frame_min=lo, frame_max=lo + int(rng.integers(0, 100)))
    features = [FeatureSpec("path_length"), FeatureSpec("straightness"),
                FeatureSpec("net_displacement"),
                FeatureSpec("mean_curvilinear_speed")]
    return CharacteristicFilter(
        feature=features[rng.integers(0, len(features))],
        comparator=comparator, value=float(rng.uniform(0, 60)))


@criterion("Filter algebra: subset / idempotence / commutation on 1000 "
           "random spec pairs; preview counts equal apply counts")
def test_filter_algebra(benchmark_db):
    rng = np.random.default_rng(512)
    selection = Selection.of(benchmark_db)
    for _ in range(1000):
        a = _random_filter_spec(rng)
        b = _random_filter_spec(rng)
        one = apply_filter(benchmark_db, selection, a)
        assert set(one.object_ids) <= set(selection.object_ids)
        assert apply_filter(benchmark_db, one, a).object_ids == one.object_ids
        ab = apply_filter(benchmark_db, one, b)
        ba = apply_filter(
            benchmark_db, apply_filter(benchmark_db, selection, b), a)
        assert set(ab.object_ids) == set(ba.object_ids)
        preview = preview_filter(benchmark_db, selection, a)
        assert preview.n_selected == len(one.object_ids)
        assert preview.selected_ids == one.object_ids


def _recovery(cfg, record):
    db, truth = generate(cfg)
    kdb, report = replay(record, db)
    comparison = compare_kdbs(truth, kdb)
    recalls = {}
    for match in comparison.matches:
        if match.group.startswith(("surface-straight", "deep-")):
            recalls[match.group] = match.overlap / match.size
    return comparison, recalls, report


@criterion("Six-group recovery: agreement and per-group recall >= 0.95 at "
           "the default noise; exact recovery at sigma 0; < 10 s")
def test_six_group_recovery(example_record):
    started = time.perf_counter()
    comparison, recalls, report = _recovery(default_config(), example_record)
    elapsed = time.perf_counter() - started
    assert len(recalls) == 6
    assert comparison.agreement >= 0.95, comparison.agreement
    for group, recall in recalls.items():
        assert recall >= 0.95, (group, recall)
    assert all(step.status == "applied" for step in report.steps)
    assert elapsed < 10.0, f"recovery took {elapsed:.1f}s"

    exact, exact_recalls, _ = _recovery(default_config(noise_sigma=0.0),
                                        example_record)
    assert exact.agreement == 1.0
    assert exact.ari == 1.0
    assert all(r == 1.0 for r in exact_recalls.values())


@criterion("Replay determinism: byte-identical exports across replays and "
           "across the CLI and the service")
def test_replay_determinism(tmp_path, benchmark_db, example_record):
    first, _ = replay(example_record, benchmark_db)
    second, _ = replay(example_record, benchmark_db)
    assert first.to_csv_bytes() == second.to_csv_bytes()
    assert first.to_json_bytes() == second.to_json_bytes()

    csv_path = tmp_path / "benchmark.csv"
    csv_path.write_text(export_table(benchmark_db), encoding="utf-8")
    record_path = tmp_path / "pipeline.json"
    record_path.write_text(example_record.to_json(), encoding="utf-8")
    out_dir = tmp_path / "cli-out"
    result = CliRunner().invoke(cli_main, [
        "replay", "--pipeline", str(record_path), "--data", str(csv_path),
        "--out", str(out_dir)])
    assert result.exit_code == 0, result.output
    cli_csv = (out_dir / "knowledge_db.csv").read_bytes()
    cli_json = (out_dir / "knowledge_db.json").read_bytes()

    app = create_app(ServiceConfig(data_dir=str(tmp_path / "service-data")))
    with TestClient(app) as client:
        resp = client.post("/datasets", json={
            "csv": csv_path.read_text(encoding="utf-8"),
            "db_id": "benchmark"})
        assert resp.status_code == 200
        resp = client.post("/replay", json={
            "record": json.loads(record_path.read_text(encoding="utf-8")),
            "db_id": "benchmark"})
        assert resp.status_code == 200
        payload = resp.json()
    service_csv = payload["export_csv"].encode("utf-8")
    service_json = KnowledgeDatabase.from_dict(
        payload["knowledge_db"]).to_json_bytes()
    assert cli_csv == service_csv
    assert cli_json == service_json


@criterion("Comparison sanity: self = 1.0/1.0, trivial grouping ARI = 0, "
           "brute-force pair oracle matches for n <= 12")
def test_comparison_sanity():
    labels = {f"o{i}": f"g{i % 3}" for i in range(30)}
    self_cmp = compare_labelings(labels, labels)
    assert self_cmp.agreement == 1.0
    assert self_cmp.ari == 1.0

    trivial = {o: "all" for o in labels}
    assert compare_labelings(labels, trivial).ari == pytest.approx(0.0,
                                                                   abs=1e-9)

    def ari_oracle(la, lb):
        a = b = c = d = 0
        for x, y in itertools.combinations(sorted(la), 2):
            sa, sb = la[x] == la[y], lb[x] == lb[y]
            if sa and sb:
                a += 1
            elif sa:
                b += 1
            elif sb:
                c += 1
            else:
                d += 1
        denom = (a + b) * (b + d) + (a + c) * (c + d)
        return 1.0 if denom == 0 else 2.0 * (a * d - b * c) / denom

    rng = np.random.default_rng(77)
    for _ in range(300):
        n = int(rng.integers(2, 13))
        la = {f"o{i}": f"g{rng.integers(0, 4)}" for i in range(n)}
        lb = {f"o{i}": f"h{rng.integers(0, 3)}" for i in range(n)}
        assert compare_labelings(la, lb).ari == pytest.approx(
            ari_oracle(la, lb), abs=1e-12)


@criterion("Scale smoke: ingest + features + FCM + finalize on 520 x 400 "
           "in < 5 s; export size near 8 MB")
def test_scale_smoke(benchmark_db, example_record):
    text = export_table(benchmark_db)
    megabytes = len(text.encode("utf-8")) / 1e6
    assert 0.8 <= megabytes <= 80.0, f"export is {megabytes:.1f} MB"

    started = time.perf_counter()
    db = ingest_table(text, db_id="benchmark").database
    session = Session(db)
    session.commit_step(example_record.steps[0])  # upper-half filter
    session.commit_step(example_record.steps[2])  # feature matrix + FCM fit
    kdb = session.finalize()
    elapsed = time.perf_counter() - started
    assert len(kdb.assignments) > 0
    matrix = build_feature_matrix(db, Selection.of(db),
                                  [FeatureSpec("start_point")])
    assert matrix.values.shape == (520, 3)
    assert elapsed < 5.0, f"scale path took {elapsed:.2f}s"

import json

import pytest
from fastapi.testclient import TestClient

from trajkd.benchmark import default_config, generate
from trajkd.data import export_table
from trajkd.service import ServiceConfig, create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(ServiceConfig(data_dir=str(tmp_path / "data")))
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def small_csv():
    db, _ = generate(default_config(n_objects=40, n_frames=30), db_id="small")
    return export_table(db)


def upload(client, csv_text, db_id="small"):
    resp = client.post("/datasets", json={"csv": csv_text, "db_id": db_id})
    assert resp.status_code == 200, resp.text
    return resp.json()


def filter_step_dict(value=0.0, output="upper"):
    return {
        "kind": "filter",
        "input": None,
        "spec": {"kind": "spatial_threshold", "axis": "y", "comparator": ">=",
                 "value": value, "statistic": "centroid"},
        "output": output,
    }


def cluster_step_dict(input_group="upper", outputs=("left", "right"),
                      as_tag=False):
    d = {
        "kind": "cluster",
        "input": input_group,
        "features": [{"kind": "start_point"}],
        "config": {"c": len(outputs), "m": 2.0, "tol": 1e-6, "max_iter": 300,
                   "seed": 5, "n_restarts": 5},
        "outputs": list(outputs),
    }
    if as_tag:
        d["as_tag"] = True
        d["tag_dimension"] = "side"
    return d


def test_upload_and_projection_counts(client, small_csv):
    info = upload(client, small_csv)
    assert info["n_objects"] == 40
    resp = client.post("/datasets/small/projection", json={"view": "front"})
    assert resp.status_code == 200
    payload = resp.json()
    assert payload["n_objects"] == 40
    assert payload["horizontal_axis"] == "x"
    assert payload["vertical_axis"] == "y"


def test_default_benchmark_projection_has_520_polylines(client, benchmark_db):
    upload(client, export_table(benchmark_db), db_id="bench")
    resp = client.post("/datasets/bench/projection",
                       json={"view": "side", "max_points": 50})
    payload = resp.json()
    assert payload["n_objects"] == 520
    assert all(len(p["points"]) <= 50 for p in payload["polylines"])


def test_projection_decimation_preserves_endpoints(client, small_csv):
    upload(client, small_csv)
    full = client.post("/datasets/small/projection",
                       json={"view": "front", "max_points": 1000}).json()
    slim = client.post("/datasets/small/projection",
                       json={"view": "front", "max_points": 7}).json()
    for a, b in zip(full["polylines"], slim["polylines"]):
        assert len(b["points"]) <= 7
        assert b["points"][0] == a["points"][0]
        assert b["points"][-1] == a["points"][-1]


def test_projection_empty_selection(client, small_csv):
    upload(client, small_csv)
    resp = client.post("/datasets/small/projection",
                       json={"view": "front", "selection": []})
    assert resp.json()["polylines"] == []


def test_unknown_dataset_404(client):
    resp = client.post("/datasets/ghost/projection", json={})
    assert resp.status_code == 404
    assert resp.json()["detail"]["code"] == "dataset_not_found"


def test_ingest_error_diagnostics(client):
    resp = client.post("/datasets", json={
        "csv": "object_id,frame,x,y,z\na,0,1,2,3\na,0,1,2,3\na,1,1,2,3\n"})
    assert resp.status_code == 400
    assert resp.json()["detail"]["code"] == "ingest_error"
    assert "duplicate" in resp.json()["detail"]["message"]


def test_rejected_rows_surfaced(client):
    resp = client.post("/datasets", json={
        "csv": "object_id,frame,x,y,z\na,0,1,2,3\na,1,nan,2,3\na,1,1,2,3\n",
        "db_id": "diag"})
    assert resp.status_code == 200
    assert resp.json()["rejected_rows"][0]["line"] == 3


def create_session(client, db_id="small"):
    resp = client.post("/sessions", json={"db_id": db_id})
    assert resp.status_code == 200
    return resp.json()["session_id"]


def test_preview_then_commit_consistent(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    preview = client.post(f"/sessions/{sid}/preview",
                          json={"step": filter_step_dict()}).json()
    committed = client.post(f"/sessions/{sid}/steps",
                            json={"step": filter_step_dict()}).json()
    assert committed["committed"]["outputs"] == preview["preview"]["outputs"]
    grouping = client.get(f"/sessions/{sid}/grouping").json()
    upper = next(g for g in grouping["groups"] if g["name"] == "upper")
    assert upper["size"] == preview["preview"]["outputs"]["upper"]


def test_preview_never_mutates(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    client.post(f"/sessions/{sid}/preview", json={"step": filter_step_dict()})
    grouping = client.get(f"/sessions/{sid}/grouping").json()
    assert grouping["groups"] == []
    assert grouping["revision"] == 0


def test_stale_preview_conflict(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    client.post(f"/sessions/{sid}/steps", json={"step": filter_step_dict()})
    resp = client.post(f"/sessions/{sid}/preview",
                       json={"step": cluster_step_dict(), "revision": 0})
    assert resp.status_code == 409
    assert resp.json()["detail"]["code"] == "stale_preview"
    ok = client.post(f"/sessions/{sid}/preview",
                     json={"step": cluster_step_dict(), "revision": 1})
    assert ok.status_code == 200


def test_label_toggle_round_trip(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    client.post(f"/sessions/{sid}/steps", json={"step": filter_step_dict()})
    grouping = client.get(f"/sessions/{sid}/grouping").json()
    some_id = None
    finalize = client.post(f"/sessions/{sid}/finalize").json()
    some_id = next(iter(finalize["knowledge_db"]["assignments"]))
    resp = client.post(f"/sessions/{sid}/steps", json={"step": {
        "kind": "manual", "input": "upper", "labels": {some_id: "picked"},
        "default_group": None,
    }})
    assert resp.status_code == 200
    finalize = client.post(f"/sessions/{sid}/finalize").json()
    assert finalize["knowledge_db"]["assignments"][some_id] == \
        ["upper", "picked"]


def test_undo_endpoint(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    client.post(f"/sessions/{sid}/steps", json={"step": filter_step_dict()})
    resp = client.post(f"/sessions/{sid}/undo")
    assert resp.status_code == 200
    assert resp.json()["groups"] == []
    resp = client.post(f"/sessions/{sid}/undo")
    assert resp.status_code == 409
    assert resp.json()["detail"]["code"] == "nothing_to_undo"


def test_reads_are_stateless(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    client.post(f"/sessions/{sid}/steps", json={"step": filter_step_dict()})
    a = client.get(f"/sessions/{sid}/grouping").json()
    b = client.get(f"/sessions/{sid}/grouping").json()
    assert a == b


def test_exported_record_replays_to_live_grouping(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    client.post(f"/sessions/{sid}/steps", json={"step": filter_step_dict()})
    client.post(f"/sessions/{sid}/steps",
                json={"step": cluster_step_dict(as_tag=False)})
    live = client.post(f"/sessions/{sid}/finalize").json()
    record = client.get(f"/sessions/{sid}/pipeline").json()["record"]
    replayed = client.post("/replay", json={"record": record,
                                            "db_id": "small"}).json()
    assert replayed["export_csv"] == live["export_csv"]
    assert replayed["knowledge_db"] == live["knowledge_db"]


def test_commit_invalid_step_machine_readable(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    resp = client.post(f"/sessions/{sid}/steps",
                       json={"step": cluster_step_dict(input_group="ghost")})
    assert resp.status_code == 422
    assert resp.json()["detail"]["code"] == "invalid_step"


def test_stats_endpoint(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    client.post(f"/sessions/{sid}/steps", json={"step": filter_step_dict()})
    resp = client.post(f"/sessions/{sid}/stats", json={
        "feature": {"kind": "mean_curvilinear_speed"}, "bins": 6})
    assert resp.status_code == 200
    stats = resp.json()["stats"]
    total = sum(g["count"] for g in stats["groups"])
    assert total == 40
    for g in stats["groups"]:
        if g["count"] == 0:
            assert g["mean"] is None
        else:
            assert sum(g["bin_counts"]) == g["count"]


def test_compare_endpoint_self_is_perfect(client, small_csv):
    upload(client, small_csv)
    sid = create_session(client)
    client.post(f"/sessions/{sid}/steps", json={"step": filter_step_dict()})
    kdb = client.post(f"/sessions/{sid}/finalize").json()["knowledge_db"]
    resp = client.post("/compare", json={"kdb_a": kdb, "kdb_b": kdb})
    assert resp.status_code == 200
    comparison = resp.json()["comparison"]
    assert comparison["agreement"] == 1.0
    assert comparison["ari"] == 1.0


def test_persistence_across_restart(tmp_path, small_csv):
    data_dir = str(tmp_path / "data")
    app = create_app(ServiceConfig(data_dir=data_dir))
    with TestClient(app) as client:
        upload(client, small_csv)
        sid = create_session(client)
        client.post(f"/sessions/{sid}/steps", json={"step": filter_step_dict()})
        before = client.get(f"/sessions/{sid}/grouping").json()

    fresh = create_app(ServiceConfig(data_dir=data_dir))
    with TestClient(fresh) as client:
        datasets = client.get("/datasets").json()["datasets"]
        assert [d["db_id"] for d in datasets] == ["small"]
        after = client.get(f"/sessions/{sid}/grouping").json()
        assert after["groups"] == before["groups"]
        assert after["steps"] == before["steps"]


def test_schema_version_on_payloads(client, small_csv):
    upload(client, small_csv)
    assert client.get("/datasets").json()["schema_version"] == 1
    assert client.get("/datasets/small").json()["schema_version"] == 1

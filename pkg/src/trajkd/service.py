"""HTTP service exposing datasets, sessions, previews, steps, and exports.

All payloads are JSON with an explicit ``schema_version`` and full-precision
numbers (Python's shortest round-trip float form preserves the exact
value), so exports hash identically across client/server round trips.

Concurrency: per-session mutations are serialized by an exclusive lock;
previews carry the session revision they were computed against and a
commit in between yields an explicit ``stale_preview`` conflict. Datasets
are immutable once ingested. Persistence is file-based under the data
directory, written atomically (write temp, then rename).
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException

from .data import ObjectDatabase, Selection, export_table, ingest_table
from .errors import PipelineError, StepSkipped, TrajkdError
from .evaluation import compare_kdbs, group_stats
from .features import FeatureSpec
from .pipeline import (
    KnowledgeDatabase,
    PipelineRecord,
    Session,
    Step,
    build_knowledge_db,
    replay,
)

SCHEMA_VERSION = 1

VIEW_AXES = {"front": ("x", "y"), "side": ("z", "y")}
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8008
    data_dir: str = "trajkd-data"
    max_upload_mb: float = 256.0

    @classmethod
    def load(cls, path: str | None = None, env=None) -> "ServiceConfig":
        """Read a JSON config file, then apply TRAJKD_* environment overrides."""
        env = os.environ if env is None else env
        values: dict = {}
        if path:
            with open(path, "r", encoding="utf-8") as fh:
                values.update(json.load(fh))
        overrides = {
            "host": env.get("TRAJKD_HOST"),
            "port": env.get("TRAJKD_PORT"),
            "data_dir": env.get("TRAJKD_DATA_DIR"),
            "max_upload_mb": env.get("TRAJKD_MAX_UPLOAD_MB"),
        }
        for key, raw in overrides.items():
            if raw is None:
                continue
            if key == "port":
                values[key] = int(raw)
            elif key == "max_upload_mb":
                values[key] = float(raw)
            else:
                values[key] = raw
        return cls(**values)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status,
                         detail={"code": code, "message": message})


class _SessionHolder:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()


class ServiceState:
    """In-memory registry backed by files under the data directory."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.datasets: dict[str, ObjectDatabase] = {}
        self.sessions: dict[str, _SessionHolder] = {}
        self.registry_lock = threading.Lock()
        self.data_dir = Path(config.data_dir)
        self._restore()

    # -- persistence --

    def _dataset_path(self, db_id: str) -> Path:
        return self.data_dir / "datasets" / f"{db_id}.csv"

    def _session_path(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / f"{session_id}.json"

    def _restore(self) -> None:
        datasets = self.data_dir / "datasets"
        if datasets.is_dir():
            for path in sorted(datasets.glob("*.csv")):
                with open(path, "r", encoding="utf-8") as fh:
                    result = ingest_table(fh, db_id=path.stem)
                self.datasets[path.stem] = result.database
        sessions = self.data_dir / "sessions"
        if sessions.is_dir():
            for path in sorted(sessions.glob("*.json")):
                payload = json.loads(path.read_text(encoding="utf-8"))
                db = self.datasets.get(payload["db_id"])
                if db is None:
                    continue
                session = Session(db)
                for step_dict in payload["record"]["steps"]:
                    session.commit_step(Step.from_dict(step_dict))
                self.sessions[path.stem] = _SessionHolder(session)

    def save_dataset(self, db: ObjectDatabase) -> None:
        text = export_table(db)
        _atomic_write(self._dataset_path(db.db_id), text.encode("utf-8"))

    def save_session(self, session_id: str) -> None:
        holder = self.sessions[session_id]
        payload = {
            "schema_version": SCHEMA_VERSION,
            "db_id": holder.session.db.db_id,
            "record": holder.session.record.to_dict(),
        }
        _atomic_write(self._session_path(session_id),
                      json.dumps(payload, sort_keys=True).encode("utf-8"))

    # -- lookups --

    def dataset(self, db_id: str) -> ObjectDatabase:
        db = self.datasets.get(db_id)
        if db is None:
            raise _error(404, "dataset_not_found", f"no dataset {db_id!r}")
        return db

    def holder(self, session_id: str) -> _SessionHolder:
        holder = self.sessions.get(session_id)
        if holder is None:
            raise _error(404, "session_not_found", f"no session {session_id!r}")
        return holder


def _decimate_indices(n: int, max_points: int):
    import numpy as np

    if n <= max_points:
        return np.arange(n)
    # uniform stride keeping both endpoints, in original order
    return np.unique(np.round(np.linspace(0, n - 1, max_points)).astype(int))


def _projection_payload(db: ObjectDatabase, view: str, max_points: int,
                        object_ids, groups: dict[str, str]) -> dict:
    h_axis, v_axis = VIEW_AXES[view]
    hi, vi = AXIS_INDEX[h_axis], AXIS_INDEX[v_axis]
    polylines = []
    for oid in object_ids:
        traj = db.trajectories[oid]
        idx = _decimate_indices(len(traj), max_points)
        pts = traj.positions[idx][:, (hi, vi)]
        polylines.append({
            "object_id": oid,
            "points": [[float(a), float(b)] for a, b in pts],
            "group": groups.get(oid),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "view": view,
        "horizontal_axis": h_axis,
        "vertical_axis": v_axis,
        "n_objects": len(polylines),
        "polylines": polylines,
    }


def _session_groups(session: Session) -> dict[str, str]:
    kdb = session.finalize()
    labels = {oid: "/".join(path) for oid, path in kdb.assignments.items()}
    for oid in kdb.excluded:
        labels[oid] = "__excluded__"
    return labels


def _grouping_payload(session: Session) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "revision": session.revision,
        "groups": [g.to_dict() for g in session.grouping()],
        "counts": session.counts(),
        "steps": [s.to_dict() for s in session.record.steps],
    }


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    state = ServiceState(config)
    app = FastAPI(title="trajkd service")
    app.state.trajkd = state

    max_upload_bytes = int(config.max_upload_mb * 1024 * 1024)

    @app.get("/health")
    def health():
        return {"schema_version": SCHEMA_VERSION, "status": "ok"}

    # -- datasets --

    @app.post("/datasets")
    def create_dataset(payload: dict = Body(...)):
        csv_text = payload.get("csv")
        if not isinstance(csv_text, str) or not csv_text:
            raise _error(400, "missing_csv", "payload needs a 'csv' field")
        if len(csv_text.encode("utf-8")) > max_upload_bytes:
            raise _error(413, "upload_too_large",
                         f"upload exceeds {config.max_upload_mb} MB")
        db_id = payload.get("db_id") or f"db-{uuid.uuid4().hex[:8]}"
        with state.registry_lock:
            if db_id in state.datasets:
                raise _error(409, "dataset_exists", f"dataset {db_id!r} exists")
        try:
            result = ingest_table(csv_text, db_id=db_id,
                                  complete_tracks=payload.get("complete_tracks", True))
        except TrajkdError as exc:
            raise _error(400, "ingest_error", str(exc))
        db = result.database
        with state.registry_lock:
            state.datasets[db_id] = db
        state.save_dataset(db)
        return {
            "schema_version": SCHEMA_VERSION,
            "db_id": db_id,
            "n_objects": len(db),
            "frame_range": list(db.frame_range),
            "rejected_rows": [
                {"line": line, "reason": reason}
                for line, reason in result.report.rejected_rows
            ],
            "excluded_objects": [
                {"object_id": oid, "reason": reason}
                for oid, reason in result.report.excluded_objects
            ],
        }

    @app.get("/datasets")
    def list_datasets():
        return {
            "schema_version": SCHEMA_VERSION,
            "datasets": [
                {"db_id": db_id, "n_objects": len(db),
                 "frame_range": list(db.frame_range)}
                for db_id, db in sorted(state.datasets.items())
            ],
        }

    @app.get("/datasets/{db_id}")
    def get_dataset(db_id: str):
        db = state.dataset(db_id)
        return {
            "schema_version": SCHEMA_VERSION,
            "db_id": db_id,
            "n_objects": len(db),
            "frame_range": list(db.frame_range),
            "complete_tracks": db.complete_tracks,
            "object_ids": list(db.object_ids),
        }

    @app.post("/datasets/{db_id}/projection")
    def get_projection(db_id: str, payload: dict = Body(default={})):
        db = state.dataset(db_id)
        view = payload.get("view", "front")
        if view not in VIEW_AXES:
            raise _error(400, "unknown_view", f"view must be one of {sorted(VIEW_AXES)}")
        max_points = int(payload.get("max_points", 200))
        if max_points < 2:
            raise _error(400, "bad_max_points", "max_points must be >= 2")
        selection = payload.get("selection")
        if selection is None:
            object_ids = db.object_ids
        else:
            try:
                object_ids = Selection.of(db, selection).object_ids
            except TrajkdError as exc:
                raise _error(400, "bad_selection", str(exc))
        groups: dict[str, str] = {}
        session_id = payload.get("session_id")
        if session_id:
            holder = state.holder(session_id)
            with holder.lock:
                groups = _session_groups(holder.session)
        return _projection_payload(db, view, max_points, object_ids, groups)

    # -- sessions --

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)):
        db = state.dataset(payload.get("db_id", ""))
        session_id = f"session-{uuid.uuid4().hex[:8]}"
        with state.registry_lock:
            state.sessions[session_id] = _SessionHolder(Session(db))
        state.save_session(session_id)
        return {"schema_version": SCHEMA_VERSION, "session_id": session_id,
                "db_id": db.db_id, "revision": 0}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        holder = state.holder(session_id)
        with holder.lock:
            payload = _grouping_payload(holder.session)
        payload["db_id"] = holder.session.db.db_id
        payload["session_id"] = session_id
        return payload

    def _parse_step(holder: _SessionHolder, payload: dict) -> Step:
        step_dict = payload.get("step")
        if not isinstance(step_dict, dict):
            raise _error(400, "missing_step", "payload needs a 'step' object")
        step_dict = dict(step_dict)
        step_dict.setdefault("step_id", holder.session.record.next_step_id())
        try:
            return Step.from_dict(step_dict)
        except TrajkdError as exc:
            raise _error(400, "invalid_step", str(exc))

    @app.post("/sessions/{session_id}/preview")
    def preview_step(session_id: str, payload: dict = Body(...)):
        holder = state.holder(session_id)
        with holder.lock:
            expected = payload.get("revision")
            if expected is not None and expected != holder.session.revision:
                raise _error(409, "stale_preview",
                             f"preview against revision {expected}, "
                             f"session is at {holder.session.revision}")
            step = _parse_step(holder, payload)
            try:
                result = holder.session.preview_step(step)
            except StepSkipped as exc:
                raise _error(409, "step_inapplicable", str(exc))
            except TrajkdError as exc:
                raise _error(422, "invalid_step", str(exc))
            return {
                "schema_version": SCHEMA_VERSION,
                "revision": holder.session.revision,
                "preview": result.to_dict(),
            }

    @app.post("/sessions/{session_id}/steps")
    def commit_step(session_id: str, payload: dict = Body(...)):
        holder = state.holder(session_id)
        with holder.lock:
            step = _parse_step(holder, payload)
            try:
                result = holder.session.commit_step(step)
            except StepSkipped as exc:
                raise _error(409, "step_inapplicable", str(exc))
            except TrajkdError as exc:
                raise _error(422, "invalid_step", str(exc))
            state.save_session(session_id)
            response = _grouping_payload(holder.session)
            response["committed"] = result.to_dict()
            return response

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        holder = state.holder(session_id)
        with holder.lock:
            try:
                holder.session.undo()
            except PipelineError as exc:
                raise _error(409, "nothing_to_undo", str(exc))
            state.save_session(session_id)
            return _grouping_payload(holder.session)

    @app.get("/sessions/{session_id}/grouping")
    def get_grouping(session_id: str):
        holder = state.holder(session_id)
        with holder.lock:
            return _grouping_payload(holder.session)

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        holder = state.holder(session_id)
        with holder.lock:
            kdb = holder.session.finalize()
        return {
            "schema_version": SCHEMA_VERSION,
            "knowledge_db": kdb.to_dict(),
            "export_csv": kdb.to_csv_bytes().decode("utf-8"),
        }

    @app.get("/sessions/{session_id}/pipeline")
    def export_pipeline(session_id: str):
        holder = state.holder(session_id)
        with holder.lock:
            return {
                "schema_version": SCHEMA_VERSION,
                "record": holder.session.record.to_dict(),
                "pipeline_hash": holder.session.record.digest(),
            }

    @app.post("/sessions/{session_id}/stats")
    def session_stats(session_id: str, payload: dict = Body(...)):
        holder = state.holder(session_id)
        feature_dict = payload.get("feature")
        if not isinstance(feature_dict, dict):
            raise _error(400, "missing_feature", "payload needs a 'feature' object")
        try:
            feature = FeatureSpec.from_dict(feature_dict)
        except TrajkdError as exc:
            raise _error(400, "invalid_feature", str(exc))
        bins = int(payload.get("bins", 10))
        with holder.lock:
            kdb = holder.session.finalize()
            try:
                stats = group_stats(holder.session.db, kdb, feature, bins=bins)
            except TrajkdError as exc:
                raise _error(422, "stats_error", str(exc))
        return {"schema_version": SCHEMA_VERSION, "stats": stats.to_dict()}

    # -- replay and comparison --

    @app.post("/replay")
    def import_and_replay(payload: dict = Body(...)):
        db = state.dataset(payload.get("db_id", ""))
        record_dict = payload.get("record")
        if not isinstance(record_dict, dict):
            raise _error(400, "missing_record", "payload needs a 'record' object")
        try:
            record = PipelineRecord.from_dict(record_dict)
        except TrajkdError as exc:
            raise _error(400, "invalid_record", str(exc))
        overrides = payload.get("overrides") or None
        manual_policy = payload.get("manual_policy", "by-id")
        try:
            kdb, report = replay(record, db, overrides=overrides,
                                 manual_policy=manual_policy,
                                 strict=bool(payload.get("strict", False)))
        except StepSkipped as exc:
            raise _error(409, "step_failed", str(exc))
        except TrajkdError as exc:
            raise _error(422, "replay_error", str(exc))
        return {
            "schema_version": SCHEMA_VERSION,
            "knowledge_db": kdb.to_dict(),
            "export_csv": kdb.to_csv_bytes().decode("utf-8"),
            "report": report.to_dict(),
        }

    @app.post("/compare")
    def compare(payload: dict = Body(...)):
        try:
            kdb_a = KnowledgeDatabase.from_dict(payload["kdb_a"])
            kdb_b = KnowledgeDatabase.from_dict(payload["kdb_b"])
        except (KeyError, TypeError, TrajkdError) as exc:
            raise _error(400, "invalid_kdb", f"bad kdb payload: {exc}")
        depth = payload.get("depth")
        try:
            result = compare_kdbs(kdb_a, kdb_b,
                                  depth=None if depth is None else int(depth))
        except TrajkdError as exc:
            raise _error(422, "compare_error", str(exc))
        return {"schema_version": SCHEMA_VERSION, "comparison": result.to_dict()}

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service with uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="info")

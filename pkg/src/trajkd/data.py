"""Trajectory object databases: domain types, table ingestion, validation, export.

An object database holds one trajectory per tracked object over a shared
frame range. Databases are immutable after construction; every operation
that "changes" data builds a new database.

The canonical table format is UTF-8 CSV with the header
``object_id,frame,x,y,z`` and coordinates printed with up to 9 significant
digits. Exporting a database and re-ingesting it reproduces the database
bit for bit for coordinates representable at that precision.
"""

from __future__ import annotations

import csv
import io
import json

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import IngestError, TrajkdError

CANONICAL_COLUMNS = ("object_id", "frame", "x", "y", "z")
COORD_FORMAT = "%.9g"

AXES = {"x": 0, "y": 1, "z": 2}


class Point3(NamedTuple):
    """A spatial position. Components must be finite."""

    x: float
    y: float
    z: float


def _as_positions(values) -> np.ndarray:
    pos = np.asarray(values, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise TrajkdError(f"positions must be (n, 3), got shape {pos.shape}")
    return pos


@dataclass(frozen=True)
class Trajectory:
    """Ordered 3D positions of one object over integer frame indices.

    Invariants enforced at construction: at least two samples, strictly
    increasing frames (hence no duplicates), finite coordinates.
    """

    object_id: str
    frames: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.int64)
        positions = _as_positions(self.positions)
        if frames.ndim != 1 or len(frames) != len(positions):
            raise TrajkdError(
                f"trajectory {self.object_id!r}: frames and positions disagree"
            )
        if len(frames) < 2:
            raise TrajkdError(
                f"trajectory {self.object_id!r} has {len(frames)} sample(s); "
                "at least 2 are required"
            )
        if np.any(frames < 0):
            raise TrajkdError(f"trajectory {self.object_id!r} has negative frames")
        if np.any(np.diff(frames) <= 0):
            raise TrajkdError(
                f"trajectory {self.object_id!r}: frames must be strictly increasing"
            )
        if not np.all(np.isfinite(positions)):
            raise TrajkdError(
                f"trajectory {self.object_id!r} contains non-finite coordinates"
            )
        frames.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "positions", positions)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def start(self) -> Point3:
        return Point3(*self.positions[0])

    @property
    def end(self) -> Point3:
        return Point3(*self.positions[-1])

    def covers(self, frame_range: tuple[int, int]) -> bool:
        """True if the trajectory has one sample for every frame in the range."""
        lo, hi = frame_range
        return (
            self.frames[0] == lo
            and self.frames[-1] == hi
            and len(self.frames) == hi - lo + 1
        )

    def has_consecutive_frames(self) -> bool:
        return bool(np.all(np.diff(self.frames) == 1))


@dataclass(frozen=True)
class ObjectDatabase:
    """A named, immutable collection of trajectories sharing a frame range.

    ``complete_tracks`` records the contract that every trajectory covers the
    full frame range; use :func:`validate` to check it. ``time_per_frame``
    maps frame indices to physical time; ``vertical_axis`` names the axis
    drawn vertically in views (convention, configurable per database).
    """

    db_id: str
    trajectories: dict[str, Trajectory]
    frame_range: tuple[int, int]
    complete_tracks: bool = True
    time_per_frame: float = 1.0
    vertical_axis: str = "y"

    def __post_init__(self):
        for oid, traj in self.trajectories.items():
            if oid != traj.object_id:
                raise TrajkdError(f"key {oid!r} != trajectory id {traj.object_id!r}")
        if self.vertical_axis not in AXES:
            raise TrajkdError(f"unknown vertical axis {self.vertical_axis!r}")

    @classmethod
    def from_trajectories(
        cls, db_id: str, trajectories: Iterable[Trajectory], **kwargs
    ) -> "ObjectDatabase":
        """Build a database; frame range is the union of all trajectories."""
        by_id: dict[str, Trajectory] = {}
        for traj in trajectories:
            if traj.object_id in by_id:
                raise TrajkdError(f"duplicate object_id {traj.object_id!r}")
            by_id[traj.object_id] = traj
        by_id = dict(sorted(by_id.items()))
        if by_id:
            lo = min(int(t.frames[0]) for t in by_id.values())
            hi = max(int(t.frames[-1]) for t in by_id.values())
        else:
            lo = hi = 0
        return cls(db_id=db_id, trajectories=by_id, frame_range=(lo, hi), **kwargs)

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def object_ids(self) -> tuple[str, ...]:
        return tuple(self.trajectories)

    @property
    def n_frames(self) -> int:
        return self.frame_range[1] - self.frame_range[0] + 1

    def centroid(self) -> np.ndarray:
        """Mean of all samples of all trajectories (the database center)."""
        if not self.trajectories:
            return np.zeros(3)
        total = np.zeros(3)
        count = 0
        for traj in self.trajectories.values():
            total += traj.positions.sum(axis=0)
            count += len(traj)
        return total / count


def summary_tables(db: ObjectDatabase) -> dict:
    """Per-object location summaries, aligned with ``db.object_ids``.

    Derived data only, computed once per (immutable) database and cached on
    the instance; filters use it to evaluate predicates vectorized.
    """
    cache = db.__dict__.get("_summary_tables")
    if cache is not None:
        return cache
    ids = db.object_ids
    n = len(ids)
    tables = {
        "index": {oid: i for i, oid in enumerate(ids)},
        "centroid": np.empty((n, 3)),
        "start": np.empty((n, 3)),
        "end": np.empty((n, 3)),
        "pos_min": np.empty((n, 3)),
        "pos_max": np.empty((n, 3)),
        "features": {},
    }
    for i, oid in enumerate(ids):
        pos = db.trajectories[oid].positions
        tables["centroid"][i] = pos.mean(axis=0)
        tables["start"][i] = pos[0]
        tables["end"][i] = pos[-1]
        tables["pos_min"][i] = pos.min(axis=0)
        tables["pos_max"][i] = pos.max(axis=0)
    object.__setattr__(db, "_summary_tables", tables)
    return tables


@dataclass(frozen=True)
class Selection:
    """A subset of a database's objects, the unit filters and clusterings act on."""

    db_id: str
    object_ids: tuple[str, ...]

    @classmethod
    def of(cls, db: ObjectDatabase, object_ids: Iterable[str] | None = None) -> "Selection":
        if object_ids is None:
            ids = db.object_ids
        else:
            ids = tuple(sorted(set(object_ids)))
            missing = [i for i in ids if i not in db.trajectories]
            if missing:
                raise TrajkdError(f"selection references unknown object_ids {missing[:5]}")
        return cls(db_id=db.db_id, object_ids=ids)

    def __len__(self) -> int:
        return len(self.object_ids)


# --- ingestion ---------------------------------------------------------------


@dataclass
class IngestReport:
    """Per-row and per-object diagnostics from :func:`ingest_table`."""

    n_rows: int = 0
    rejected_rows: list[tuple[int, str]] = field(default_factory=list)
    excluded_objects: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class IngestResult:
    database: ObjectDatabase
    report: IngestReport


def _resolve_schema(
    header: list[str] | None, schema: Mapping[str, str | int] | None
) -> dict[str, int]:
    """Map each canonical field to a column index."""
    mapping: dict[str, int] = {}
    schema = dict(schema) if schema else {}
    for fld in CANONICAL_COLUMNS:
        spec = schema.get(fld, fld)
        if isinstance(spec, int):
            mapping[fld] = spec
        else:
            if header is None:
                raise IngestError(
                    f"column {spec!r} for field {fld!r} needs a header row"
                )
            if spec not in header:
                raise IngestError(f"missing column {spec!r} in header {header}")
            mapping[fld] = header.index(spec)
    return mapping


def _parse_rows(lines_and_rows, cols, report):
    """Column-wise vectorized parse; falls back to a row loop (with per-row
    diagnostics) when any row is unparseable."""
    oid_col = cols["object_id"]
    num_cols = [cols["frame"], cols["x"], cols["y"], cols["z"]]
    try:
        oids = np.array([r[oid_col].strip() for _, r in lines_and_rows])
        frames = np.array([r[num_cols[0]] for _, r in lines_and_rows],
                          dtype=np.int64)
        coords = np.empty((len(lines_and_rows), 3))
        for j, ci in enumerate(num_cols[1:]):
            coords[:, j] = np.array([r[ci] for _, r in lines_and_rows],
                                    dtype=np.float64)
        line_nos = np.array([ln for ln, _ in lines_and_rows], dtype=np.int64)
        return oids, frames, coords, line_nos
    except (ValueError, IndexError):
        pass
    parsed = []
    for line_no, row in lines_and_rows:
        try:
            oid = row[oid_col].strip()
            frame = int(row[num_cols[0]])
            xyz = tuple(float(row[ci]) for ci in num_cols[1:])
        except (IndexError, ValueError) as exc:
            report.rejected_rows.append((line_no, f"unparseable row: {exc}"))
            continue
        parsed.append((line_no, oid, frame, xyz))
    if not parsed:
        return (np.array([], dtype=str), np.array([], dtype=np.int64),
                np.empty((0, 3)), np.array([], dtype=np.int64))
    oids = np.array([p[1] for p in parsed])
    frames = np.array([p[2] for p in parsed], dtype=np.int64)
    coords = np.array([p[3] for p in parsed], dtype=np.float64)
    line_nos = np.array([p[0] for p in parsed], dtype=np.int64)
    return oids, frames, coords, line_nos


def ingest_table(
    source,
    schema: Mapping[str, str | int] | None = None,
    db_id: str = "db",
    complete_tracks: bool = True,
    has_header: bool = True,
    **db_kwargs,
) -> IngestResult:
    """Read a row-oriented table of (object_id, frame, x, y, z) samples.

    ``source`` is a path, a text stream, or a string containing CSV data.
    ``schema`` maps canonical field names to column names or 0-based
    positions; by default the canonical header is expected.

    Rows with non-finite coordinates are rejected (with a diagnostic);
    a repeated (object_id, frame) pair is a hard error; objects ending up
    with fewer than 2 samples are excluded and reported. Under the
    complete-track contract, trajectories not covering the resulting frame
    range are likewise excluded and reported.
    """
    if isinstance(source, (str,)) and "\n" not in source and "," not in source:
        stream = open(source, "r", encoding="utf-8", newline="")
        close = True
    elif isinstance(source, str):
        stream = io.StringIO(source)
        close = False
    else:
        stream = source
        close = False

    report = IngestReport()
    try:
        reader = csv.reader(stream)
        header = None
        if has_header:
            header = next(reader, None)
            if header is None:
                raise IngestError("empty input: no header row")
            header = [h.strip() for h in header]
        cols = _resolve_schema(header, schema)
        first_line = 2 if has_header else 1
        lines_and_rows = [
            (line_no, row)
            for line_no, row in enumerate(reader, start=first_line)
            if len(row) > 1 or (row and row[0].strip())
        ]
    finally:
        if close:
            stream.close()
    report.n_rows = len(lines_and_rows)

    oids, frames, coords, line_nos = _parse_rows(lines_and_rows, cols, report)

    bad = ~(np.isfinite(coords).all(axis=1))
    for idx in np.nonzero(bad)[0]:
        report.rejected_rows.append(
            (int(line_nos[idx]),
             f"non-finite coordinate for object '{oids[idx]}'")
        )
    neg = (frames < 0) & ~bad
    for idx in np.nonzero(neg)[0]:
        report.rejected_rows.append(
            (int(line_nos[idx]),
             f"negative frame {frames[idx]} for object '{oids[idx]}'")
        )
    keep = ~(bad | neg)
    oids, frames, coords = oids[keep], frames[keep], coords[keep]
    report.rejected_rows.sort()

    order = np.lexsort((frames, oids))
    oids, frames, coords = oids[order], frames[order], coords[order]
    dup = (oids[1:] == oids[:-1]) & (frames[1:] == frames[:-1])
    if dup.any():
        i = int(np.nonzero(dup)[0][0])
        raise IngestError(
            f"duplicate sample for (object_id='{oids[i]}', frame={frames[i]})"
        )

    trajectories = []
    unique_ids, starts = np.unique(oids, return_index=True)
    bounds = list(starts) + [len(oids)]
    for oid, lo, hi in zip(unique_ids, bounds[:-1], bounds[1:]):
        if hi - lo < 2:
            report.excluded_objects.append(
                (str(oid), f"only {hi - lo} sample(s)")
            )
            continue
        trajectories.append(
            Trajectory(object_id=str(oid), frames=frames[lo:hi].copy(),
                       positions=coords[lo:hi].copy())
        )

    db = ObjectDatabase.from_trajectories(
        db_id, trajectories, complete_tracks=complete_tracks, **db_kwargs
    )
    if complete_tracks and len(db):
        kept = {}
        dropped = False
        for oid, traj in db.trajectories.items():
            if traj.covers(db.frame_range):
                kept[oid] = traj
            else:
                report.excluded_objects.append(
                    (oid, f"does not cover frame range {db.frame_range}")
                )
                dropped = True
        if dropped:
            db = ObjectDatabase(
                db_id=db.db_id,
                trajectories=kept,
                frame_range=db.frame_range,
                complete_tracks=True,
                **db_kwargs,
            )
    return IngestResult(database=db, report=report)


# --- validation --------------------------------------------------------------


@dataclass
class Violation:
    code: str
    object_id: str | None
    detail: str


@dataclass
class ValidationReport:
    n_objects: int
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(db: ObjectDatabase) -> ValidationReport:
    """Report every invariant violation in a database without mutating it."""
    violations: list[Violation] = []
    lo, hi = db.frame_range
    for oid, traj in db.trajectories.items():
        if traj.frames[0] < lo or traj.frames[-1] > hi:
            violations.append(
                Violation("frame_out_of_range", oid,
                          f"frames [{traj.frames[0]}, {traj.frames[-1]}] "
                          f"outside {db.frame_range}")
            )
        elif db.complete_tracks and not traj.covers(db.frame_range):
            violations.append(
                Violation("incomplete_track", oid,
                          f"covers {len(traj)} of {hi - lo + 1} frames")
            )
        if not np.all(np.isfinite(traj.positions)):
            violations.append(Violation("non_finite", oid, "non-finite coordinate"))
    return ValidationReport(n_objects=len(db), violations=violations)


# --- export ------------------------------------------------------------------


def export_table(db: ObjectDatabase, target=None) -> str | None:
    """Write the canonical CSV table; returns the text if ``target`` is None."""
    buf = io.StringIO()
    buf.write(",".join(CANONICAL_COLUMNS) + "\n")
    for oid in db.object_ids:
        traj = db.trajectories[oid]
        for frame, pos in zip(traj.frames, traj.positions):
            coords = ",".join(COORD_FORMAT % c for c in pos)
            buf.write(f"{oid},{frame},{coords}\n")
    text = buf.getvalue()
    if target is None:
        return text
    if isinstance(target, (str,)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        target.write(text)
    return None


def db_to_json(db: ObjectDatabase) -> str:
    """JSON export mirroring the canonical table fields."""
    payload = {
        "schema_version": 1,
        "db_id": db.db_id,
        "frame_range": list(db.frame_range),
        "complete_tracks": db.complete_tracks,
        "time_per_frame": db.time_per_frame,
        "vertical_axis": db.vertical_axis,
        "objects": [
            {
                "object_id": oid,
                "frames": traj.frames.tolist(),
                "positions": [[float(COORD_FORMAT % c) for c in p] for p in traj.positions],
            }
            for oid, traj in db.trajectories.items()
        ],
    }
    return json.dumps(payload)


def db_from_json(text: str) -> ObjectDatabase:
    payload = json.loads(text)
    trajectories = [
        Trajectory(
            object_id=obj["object_id"],
            frames=np.asarray(obj["frames"], dtype=np.int64),
            positions=np.asarray(obj["positions"], dtype=np.float64),
        )
        for obj in payload["objects"]
    ]
    return ObjectDatabase(
        db_id=payload["db_id"],
        trajectories={t.object_id: t for t in trajectories},
        frame_range=tuple(payload["frame_range"]),
        complete_tracks=payload.get("complete_tracks", True),
        time_per_frame=payload.get("time_per_frame", 1.0),
        vertical_axis=payload.get("vertical_axis", "y"),
    )

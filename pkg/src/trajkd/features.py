"""Per-trajectory movement features.

Every feature is a pure function of an immutable trajectory (plus
parameters), so extraction parallelizes trivially across objects.
:func:`build_feature_matrix` evaluates a list of feature specs over a
selection and optionally z-scores columns over that selection.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import AXES, ObjectDatabase, Point3, Selection, Trajectory
from .errors import FeatureError

SCALAR_KINDS = (
    "path_length",
    "net_displacement",
    "straightness",
    "mean_turning_angle",
    "mean_curvilinear_speed",
    "plane_angle",
    "rotated_projection_range",
)
VECTOR_KINDS = ("start_point", "end_point")
FEATURE_KINDS = VECTOR_KINDS + SCALAR_KINDS

PRINCIPAL_PLANES = {"xy": ("x", "y"), "xz": ("x", "z"), "yz": ("y", "z")}


def start_point(traj: Trajectory) -> Point3:
    """Position at the trajectory's first frame."""
    return traj.start


def end_point(traj: Trajectory) -> Point3:
    """Position at the trajectory's last frame."""
    return traj.end


def _segments(traj: Trajectory) -> np.ndarray:
    return np.diff(traj.positions, axis=0)


def path_length(traj: Trajectory) -> float:
    """Total length of the polyline through all samples."""
    return float(np.linalg.norm(_segments(traj), axis=1).sum())


def net_displacement(traj: Trajectory) -> float:
    """Euclidean distance between end and start positions."""
    return float(np.linalg.norm(traj.positions[-1] - traj.positions[0]))


def straightness(traj: Trajectory) -> float:
    """Net displacement over path length, in [0, 1]; 0 for a zero-length path."""
    total = path_length(traj)
    if total == 0.0:
        return 0.0
    return net_displacement(traj) / total


def mean_curvilinear_speed(traj: Trajectory) -> float:
    """Mean per-frame step distance (length units per frame).

    Requires consecutive frames: a gap makes the per-frame mean
    meaningless under the complete-track contract.
    """
    gaps = np.diff(traj.frames)
    bad = np.nonzero(gaps != 1)[0]
    if bad.size:
        i = bad[0]
        raise FeatureError(
            f"frame gap between {traj.frames[i]} and {traj.frames[i + 1]}",
            object_id=traj.object_id,
        )
    steps = np.linalg.norm(_segments(traj), axis=1)
    return float(steps.mean())


def mean_turning_angle(traj: Trajectory) -> float:
    """Mean angle (degrees, in [0, 180]) between consecutive displacement vectors.

    Zero-length displacements are skipped so that stationary stretches do
    not fabricate curvature; if no angle remains, the result is 0.
    """
    if len(traj) < 3:
        raise FeatureError(
            "turning angle needs at least 3 samples", object_id=traj.object_id
        )
    segs = _segments(traj)
    norms = np.linalg.norm(segs, axis=1)
    nonzero = segs[norms > 0]
    if len(nonzero) < 2:
        return 0.0
    a = nonzero[:-1]
    b = nonzero[1:]
    # atan2 form is well conditioned near 0 and 180 degrees
    cross = np.linalg.norm(np.cross(a, b), axis=1)
    dot = (a * b).sum(axis=1)
    angles = np.degrees(np.arctan2(cross, dot))
    return float(angles.mean())


def plane_angle(
    traj: Trajectory, plane_normal, zero_fallback: bool = False
) -> float:
    """Angle (degrees, in [0, 90]) between the net-displacement vector and a plane.

    The plane is given by its normal; the angle is arcsin(|d·n̂| / ‖d‖).
    A zero net displacement is an error unless ``zero_fallback`` maps it to 0°.
    """
    normal = np.asarray(plane_normal, dtype=np.float64)
    nn = np.linalg.norm(normal)
    if not np.isfinite(nn) or nn == 0.0:
        raise FeatureError("plane normal is not normalizable")
    d = traj.positions[-1] - traj.positions[0]
    dn = np.linalg.norm(d)
    if dn == 0.0:
        if zero_fallback:
            return 0.0
        raise FeatureError(
            "zero net displacement: plane angle undefined", object_id=traj.object_id
        )
    s = abs(float(d @ (normal / nn))) / dn
    return math.degrees(math.asin(min(1.0, s)))


def _rotation_matrix(axis: str, theta_deg: float) -> np.ndarray:
    """Right-handed rotation by theta about a principal axis."""
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    if axis == "z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    raise FeatureError(f"unknown rotation axis {axis!r}")


def rotated_projection_range(
    traj: Trajectory,
    angle_deg: float,
    rotation_axis: str = "y",
    projection_plane: str = "xz",
    extent_axis: str = "x",
    center=None,
) -> float:
    """Extent of the trajectory along one axis after a rigid rotation.

    All samples are rotated by ``angle_deg`` about ``rotation_axis``
    (right-handed, around ``center``; the result is independent of the
    center), orthogonally projected onto ``projection_plane``, and the
    max minus min of the projected coordinate along ``extent_axis`` is
    returned.
    """
    if projection_plane not in PRINCIPAL_PLANES:
        raise FeatureError(f"unknown projection plane {projection_plane!r}")
    if extent_axis not in PRINCIPAL_PLANES[projection_plane]:
        raise FeatureError(
            f"extent axis {extent_axis!r} not in plane {projection_plane!r}"
        )
    rot = _rotation_matrix(rotation_axis, angle_deg)
    c = np.zeros(3) if center is None else np.asarray(center, dtype=np.float64)
    rotated = (traj.positions - c) @ rot.T
    coord = rotated[:, AXES[extent_axis]]
    return float(coord.max() - coord.min())


# --- feature specs and matrices ----------------------------------------------


@dataclass(frozen=True)
class FeatureSpec:
    """A feature kind plus its parameters and normalization mode.

    ``normalize`` is "none" or "zscore" (z-scoring is computed over the
    selection the matrix is built from). ``skip_on_error`` drops objects
    whose feature is undefined instead of aborting the whole matrix.
    """

    kind: str
    normalize: str = "none"
    skip_on_error: bool = False
    # plane_angle
    plane_normal: tuple[float, float, float] | None = None
    zero_fallback: bool = False
    # rotated_projection_range
    angle_deg: float | None = None
    rotation_axis: str = "y"
    projection_plane: str = "xz"
    extent_axis: str = "x"

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise FeatureError(f"unknown feature kind {self.kind!r}")
        if self.normalize not in ("none", "zscore"):
            raise FeatureError(f"unknown normalization {self.normalize!r}")
        if self.kind == "plane_angle":
            if self.plane_normal is None:
                raise FeatureError("plane_angle needs plane_normal")
            n = np.asarray(self.plane_normal, dtype=np.float64)
            if n.shape != (3,) or not np.all(np.isfinite(n)) or not np.linalg.norm(n):
                raise FeatureError("plane_normal is not a normalizable 3-vector")
        if self.kind == "rotated_projection_range":
            if self.angle_deg is None:
                raise FeatureError("rotated_projection_range needs angle_deg")
            if not 0.0 <= self.angle_deg < 360.0:
                raise FeatureError("angle_deg must lie in [0, 360)")
            if self.rotation_axis not in AXES:
                raise FeatureError(f"unknown rotation axis {self.rotation_axis!r}")
            if self.projection_plane not in PRINCIPAL_PLANES:
                raise FeatureError(f"unknown plane {self.projection_plane!r}")
            if self.extent_axis not in PRINCIPAL_PLANES[self.projection_plane]:
                raise FeatureError(
                    f"extent axis {self.extent_axis!r} not in plane "
                    f"{self.projection_plane!r}"
                )

    @property
    def column_names(self) -> tuple[str, ...]:
        if self.kind in VECTOR_KINDS:
            base = "start" if self.kind == "start_point" else "end"
            return (f"{base}_x", f"{base}_y", f"{base}_z")
        return (self.kind,)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.normalize != "none":
            d["normalize"] = self.normalize
        if self.skip_on_error:
            d["skip_on_error"] = True
        if self.kind == "plane_angle":
            d["plane_normal"] = list(self.plane_normal)
            if self.zero_fallback:
                d["zero_fallback"] = True
        if self.kind == "rotated_projection_range":
            d.update(
                angle_deg=self.angle_deg,
                rotation_axis=self.rotation_axis,
                projection_plane=self.projection_plane,
                extent_axis=self.extent_axis,
            )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        kwargs = dict(d)
        if "plane_normal" in kwargs and kwargs["plane_normal"] is not None:
            kwargs["plane_normal"] = tuple(kwargs["plane_normal"])
        return cls(**kwargs)


def evaluate_feature(
    spec: FeatureSpec, traj: Trajectory, db: ObjectDatabase | None = None
) -> np.ndarray:
    """Raw (unnormalized) value(s) of one feature for one trajectory."""
    kind = spec.kind
    if kind == "start_point":
        return np.asarray(traj.start, dtype=np.float64)
    if kind == "end_point":
        return np.asarray(traj.end, dtype=np.float64)
    if kind == "path_length":
        return np.array([path_length(traj)])
    if kind == "net_displacement":
        return np.array([net_displacement(traj)])
    if kind == "straightness":
        return np.array([straightness(traj)])
    if kind == "mean_turning_angle":
        return np.array([mean_turning_angle(traj)])
    if kind == "mean_curvilinear_speed":
        return np.array([mean_curvilinear_speed(traj)])
    if kind == "plane_angle":
        return np.array(
            [plane_angle(traj, spec.plane_normal, zero_fallback=spec.zero_fallback)]
        )
    if kind == "rotated_projection_range":
        center = db.centroid() if db is not None else None
        return np.array(
            [
                rotated_projection_range(
                    traj,
                    spec.angle_deg,
                    rotation_axis=spec.rotation_axis,
                    projection_plane=spec.projection_plane,
                    extent_axis=spec.extent_axis,
                    center=center,
                )
            ]
        )
    raise FeatureError(f"unknown feature kind {kind!r}")


@dataclass(frozen=True)
class ColumnNorm:
    """Normalization applied to one column (identity when mode == "none")."""

    mode: str
    mean: float = 0.0
    std: float = 1.0

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.mode == "none":
            return values
        return (values - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mode": self.mode, "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnNorm":
        return cls(**d)


@dataclass
class FeatureMatrix:
    """Feature vectors for an ordered set of objects.

    Rows follow ``object_ids``; ``norms`` records, per column, the
    normalization that produced the stored values (so the same transform
    can be re-applied to new points, e.g. when redistributing a dissolved
    group).
    """

    object_ids: tuple[str, ...]
    column_names: tuple[str, ...]
    values: np.ndarray
    norms: tuple[ColumnNorm, ...]
    dropped: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.values.shape != (len(self.object_ids), len(self.column_names)):
            raise FeatureError("feature matrix shape disagrees with labels")
        if not np.all(np.isfinite(self.values)):
            raise FeatureError("feature matrix contains non-finite entries")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("object_id," + ",".join(self.column_names) + "\n")
        for oid, row in zip(self.object_ids, self.values):
            buf.write(oid + "," + ",".join("%.17g" % v for v in row) + "\n")
        return buf.getvalue()


def _unique_names(specs: Sequence[FeatureSpec]) -> list[str]:
    names: list[str] = []
    for spec in specs:
        for name in spec.column_names:
            candidate = name
            k = 2
            while candidate in names:
                candidate = f"{name}_{k}"
                k += 1
            names.append(candidate)
    return names


def build_feature_matrix(
    db: ObjectDatabase, selection: Selection, specs: Sequence[FeatureSpec]
) -> FeatureMatrix:
    """One row per selected object, columns in spec order.

    Vector features expand to one column per component. A feature error
    aborts with the offending object_id unless that spec is marked
    ``skip_on_error``, in which case the object is dropped from the matrix
    and reported in ``dropped``.
    """
    if not selection.object_ids:
        raise FeatureError("selection is empty")
    if not specs:
        raise FeatureError("no feature specs given")
    column_names = _unique_names(specs)

    rows: list[np.ndarray] = []
    kept: list[str] = []
    dropped: list[tuple[str, str]] = []
    for oid in selection.object_ids:
        traj = db.trajectories[oid]
        parts: list[np.ndarray] = []
        try:
            for spec in specs:
                try:
                    parts.append(evaluate_feature(spec, traj, db))
                except FeatureError as exc:
                    if spec.skip_on_error:
                        raise _SkipObject(str(exc)) from exc
                    raise FeatureError(
                        f"feature {spec.kind!r} failed for object {oid!r}: {exc}",
                        object_id=oid,
                    ) from exc
        except _SkipObject as skip:
            dropped.append((oid, skip.reason))
            continue
        rows.append(np.concatenate(parts))
        kept.append(oid)

    if not rows:
        raise FeatureError("all selected objects were dropped")
    values = np.vstack(rows)

    norms: list[ColumnNorm] = []
    col = 0
    for spec in specs:
        for _ in spec.column_names:
            if spec.normalize == "zscore":
                mean = float(values[:, col].mean())
                std = float(values[:, col].std())
                if std == 0.0:
                    raise FeatureError(
                        f"zero variance column {column_names[col]!r}: "
                        "z-score undefined"
                    )
                norms.append(ColumnNorm("zscore", mean, std))
                values[:, col] = (values[:, col] - mean) / std
            else:
                norms.append(ColumnNorm("none"))
            col += 1

    return FeatureMatrix(
        object_ids=tuple(kept),
        column_names=tuple(column_names),
        values=values,
        norms=tuple(norms),
        dropped=dropped,
    )


class _SkipObject(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def feature_vector(
    db: ObjectDatabase, object_id: str, specs: Sequence[FeatureSpec],
    norms: Sequence[ColumnNorm],
) -> np.ndarray:
    """Feature vector of one object in a previously built matrix's space."""
    traj = db.trajectories[object_id]
    raw = np.concatenate([evaluate_feature(spec, traj, db) for spec in specs])
    return np.array([n.apply(v) for v, n in zip(raw, norms)])

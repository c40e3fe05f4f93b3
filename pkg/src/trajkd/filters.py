"""Interactive-filtering primitives producing object selections.

A filter is a per-object predicate; applying it to a selection returns
the passing subset. Predicates never depend on what else is selected, so
filters are idempotent and commute under composition. Boundary values are
included for >= and <= so threshold sweeps behave monotonically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import AXES, ObjectDatabase, Selection, Trajectory, summary_tables
from .errors import FeatureError, FilterError
from .features import FeatureSpec, evaluate_feature

STATISTICS = ("centroid", "start", "end", "all_points", "any_point")
COMPARATORS = (">=", "<=")


def _selection_rows(db: ObjectDatabase, object_ids) -> tuple[dict, np.ndarray]:
    tables = summary_tables(db)
    index = tables["index"]
    rows = np.fromiter((index[o] for o in object_ids), dtype=np.intp,
                       count=len(object_ids))
    return tables, rows


class FilterSpec:
    """Base class for filter specifications (serializable to JSON)."""

    kind: str

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict) -> "FilterSpec":
        kinds = {
            "temporal": TemporalFilter,
            "spatial_threshold": SpatialThresholdFilter,
            "spatial_box": SpatialBoxFilter,
            "characteristic": CharacteristicFilter,
        }
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in kinds:
            raise FilterError(f"unknown filter kind {kind!r}")
        return kinds[kind]._from_payload(d)

    def matches(self, db: ObjectDatabase, traj: Trajectory) -> bool:
        raise NotImplementedError

    def mask(self, db: ObjectDatabase, object_ids) -> np.ndarray | None:
        """Vectorized predicate over a selection; None means "evaluate
        per object with :meth:`matches`"."""
        return None


@dataclass(frozen=True)
class TemporalFilter(FilterSpec):
    """Pass objects whose track covers at least one frame in the window.

    Under the complete-track contract every object passes whenever the
    window intersects the database's frame range.
    """

    frame_min: int
    frame_max: int
    kind = "temporal"

    def __post_init__(self):
        if self.frame_min > self.frame_max:
            raise FilterError(
                f"frame_min {self.frame_min} > frame_max {self.frame_max}"
            )

    def matches(self, db: ObjectDatabase, traj: Trajectory) -> bool:
        frames = traj.frames
        i = np.searchsorted(frames, self.frame_min, side="left")
        return i < len(frames) and frames[i] <= self.frame_max

    def to_dict(self) -> dict:
        return {"kind": self.kind, "frame_min": self.frame_min,
                "frame_max": self.frame_max}

    @classmethod
    def _from_payload(cls, d: dict) -> "TemporalFilter":
        return cls(**d)


def _statistic_points(traj: Trajectory, statistic: str) -> np.ndarray:
    if statistic == "centroid":
        return traj.positions.mean(axis=0)[None, :]
    if statistic == "start":
        return traj.positions[:1]
    if statistic == "end":
        return traj.positions[-1:]
    if statistic in ("all_points", "any_point"):
        return traj.positions
    raise FilterError(f"unknown statistic {statistic!r}")


def _combine(mask: np.ndarray, statistic: str) -> bool:
    return bool(mask.any()) if statistic == "any_point" else bool(mask.all())


@dataclass(frozen=True)
class SpatialThresholdFilter(FilterSpec):
    """Compare one coordinate of a per-trajectory statistic to a threshold.

    ``statistic`` picks the location summary: the trajectory centroid
    (default reading of "where the object is"), its start or end point,
    or every/any sample.
    """

    axis: str
    comparator: str
    value: float
    statistic: str = "centroid"
    kind = "spatial_threshold"

    def __post_init__(self):
        if self.axis not in AXES:
            raise FilterError(f"unknown axis {self.axis!r}")
        if self.comparator not in COMPARATORS:
            raise FilterError(f"unknown comparator {self.comparator!r}")
        if self.statistic not in STATISTICS:
            raise FilterError(f"unknown statistic {self.statistic!r}")
        if not np.isfinite(self.value):
            raise FilterError("threshold must be finite")

    def matches(self, db: ObjectDatabase, traj: Trajectory) -> bool:
        coords = _statistic_points(traj, self.statistic)[:, AXES[self.axis]]
        mask = coords >= self.value if self.comparator == ">=" else coords <= self.value
        return _combine(mask, self.statistic)

    def mask(self, db: ObjectDatabase, object_ids) -> np.ndarray:
        tables, rows = _selection_rows(db, object_ids)
        ax = AXES[self.axis]
        geq = self.comparator == ">="
        if self.statistic in ("centroid", "start", "end"):
            vals = tables[self.statistic][rows, ax]
        elif self.statistic == "all_points":
            # every sample >= v iff the minimum is; <= v iff the maximum is
            vals = tables["pos_min" if geq else "pos_max"][rows, ax]
        else:  # any_point
            vals = tables["pos_max" if geq else "pos_min"][rows, ax]
        return vals >= self.value if geq else vals <= self.value

    def to_dict(self) -> dict:
        return {"kind": self.kind, "axis": self.axis,
                "comparator": self.comparator, "value": self.value,
                "statistic": self.statistic}

    @classmethod
    def _from_payload(cls, d: dict) -> "SpatialThresholdFilter":
        return cls(**d)


@dataclass(frozen=True)
class SpatialBoxFilter(FilterSpec):
    """Pass objects whose statistic lies within per-axis bounds (a window in space).

    Bounds are (lo, hi) pairs per axis; either side may be None for
    half-open windows. Axes without bounds are unconstrained.
    """

    x: tuple[float | None, float | None] = (None, None)
    y: tuple[float | None, float | None] = (None, None)
    z: tuple[float | None, float | None] = (None, None)
    statistic: str = "centroid"
    kind = "spatial_box"

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise FilterError(f"unknown statistic {self.statistic!r}")
        for axis in ("x", "y", "z"):
            lo, hi = getattr(self, axis)
            for b in (lo, hi):
                if b is not None and not np.isfinite(b):
                    raise FilterError(f"{axis} bound must be finite")
            if lo is not None and hi is not None and lo > hi:
                raise FilterError(f"{axis} bounds reversed: {lo} > {hi}")

    def matches(self, db: ObjectDatabase, traj: Trajectory) -> bool:
        pts = _statistic_points(traj, self.statistic)
        mask = np.ones(len(pts), dtype=bool)
        for axis, idx in AXES.items():
            lo, hi = getattr(self, axis)
            if lo is not None:
                mask &= pts[:, idx] >= lo
            if hi is not None:
                mask &= pts[:, idx] <= hi
        return _combine(mask, self.statistic)

    def mask(self, db: ObjectDatabase, object_ids) -> np.ndarray | None:
        if self.statistic == "any_point":
            # needs one sample inside the box on all axes at once; per-axis
            # extrema cannot decide that
            return None
        tables, rows = _selection_rows(db, object_ids)
        out = np.ones(len(rows), dtype=bool)
        for axis, idx in AXES.items():
            lo, hi = getattr(self, axis)
            if self.statistic == "all_points":
                lo_vals = tables["pos_min"][rows, idx]
                hi_vals = tables["pos_max"][rows, idx]
            else:
                lo_vals = hi_vals = tables[self.statistic][rows, idx]
            if lo is not None:
                out &= lo_vals >= lo
            if hi is not None:
                out &= hi_vals <= hi
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "x": list(self.x), "y": list(self.y),
                "z": list(self.z), "statistic": self.statistic}

    @classmethod
    def _from_payload(cls, d: dict) -> "SpatialBoxFilter":
        kwargs = {k: tuple(v) if isinstance(v, (list, tuple)) else v
                  for k, v in d.items()}
        return cls(**kwargs)


@dataclass(frozen=True)
class CharacteristicFilter(FilterSpec):
    """Select objects by a scalar feature value (e.g. path length, straightness).

    The feature must be scalar-valued and unnormalized: filters must not
    depend on the surrounding selection, otherwise applying the same
    filter twice could change the result.
    """

    feature: FeatureSpec
    comparator: str  # ">=", "<=", or "within"
    value: float | None = None
    low: float | None = None
    high: float | None = None
    kind = "characteristic"

    def __post_init__(self):
        if len(self.feature.column_names) != 1:
            raise FilterError(
                f"characteristic filter needs a scalar feature, got "
                f"{self.feature.kind!r}"
            )
        if self.feature.normalize != "none":
            raise FilterError(
                "characteristic filters require unnormalized features"
            )
        if self.comparator in COMPARATORS:
            if self.value is None or not np.isfinite(self.value):
                raise FilterError("threshold value must be finite")
        elif self.comparator == "within":
            if self.low is None or self.high is None:
                raise FilterError("within needs both bounds")
            if not (np.isfinite(self.low) and np.isfinite(self.high)):
                raise FilterError("bounds must be finite")
            if self.low > self.high:
                raise FilterError(f"bounds reversed: {self.low} > {self.high}")
        else:
            raise FilterError(f"unknown comparator {self.comparator!r}")

    def matches(self, db: ObjectDatabase, traj: Trajectory) -> bool:
        v = float(evaluate_feature(self.feature, traj, db)[0])
        return self._compare(v)

    def _compare(self, v):
        if self.comparator == ">=":
            return v >= self.value
        if self.comparator == "<=":
            return v <= self.value
        return (v >= self.low) & (v <= self.high)

    def mask(self, db: ObjectDatabase, object_ids) -> np.ndarray | None:
        tables, rows = _selection_rows(db, object_ids)
        key = json.dumps(self.feature.to_dict(), sort_keys=True)
        values = tables["features"].get(key)
        if values is None:
            try:
                values = np.array([
                    evaluate_feature(self.feature, db.trajectories[oid], db)[0]
                    for oid in db.object_ids
                ])
            except FeatureError:
                # some object's feature is undefined: take the per-object
                # path so skip-on-error and error attribution apply
                tables["features"][key] = "error"
                return None
            tables["features"][key] = values
        elif isinstance(values, str):
            return None
        return self._compare(values[rows])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "feature": self.feature.to_dict(),
             "comparator": self.comparator}
        if self.comparator == "within":
            d["low"], d["high"] = self.low, self.high
        else:
            d["value"] = self.value
        return d

    @classmethod
    def _from_payload(cls, d: dict) -> "CharacteristicFilter":
        kwargs = dict(d)
        kwargs["feature"] = FeatureSpec.from_dict(kwargs["feature"])
        return cls(**kwargs)


@dataclass
class FilterPreview:
    n_selected: int
    n_rejected: int
    selected_ids: tuple[str, ...]


def apply_filter(
    db: ObjectDatabase, selection: Selection, spec: FilterSpec
) -> Selection:
    """Subset of the selection passing the filter predicate."""
    if selection.db_id != db.db_id:
        raise FilterError(
            f"selection belongs to {selection.db_id!r}, not {db.db_id!r}"
        )
    ids = selection.object_ids
    mask = spec.mask(db, ids) if ids else np.zeros(0, dtype=bool)
    if mask is not None:
        passed = [oid for oid, ok in zip(ids, mask) if ok]
        return Selection(db_id=db.db_id, object_ids=tuple(passed))
    passed = []
    for oid in ids:
        try:
            if spec.matches(db, db.trajectories[oid]):
                passed.append(oid)
        except FeatureError as exc:
            feat = getattr(spec, "feature", None)
            if feat is not None and feat.skip_on_error:
                continue
            raise FeatureError(
                f"filter feature failed for object {oid!r}: {exc}", object_id=oid
            ) from exc
    return Selection(db_id=db.db_id, object_ids=tuple(passed))


def preview_filter(
    db: ObjectDatabase, selection: Selection, spec: FilterSpec
) -> FilterPreview:
    """Same predicate as :func:`apply_filter`, read-only."""
    result = apply_filter(db, selection, spec)
    return FilterPreview(
        n_selected=len(result.object_ids),
        n_rejected=len(selection.object_ids) - len(result.object_ids),
        selected_ids=result.object_ids,
    )

"""Session engine: recorded, replayable multi-step knowledge discovery.

A session composes information-allocation steps (filter, cluster, manual
labeling) and interactive modifications (merge, split, dissolve, exclude)
over one object database. Every commit appends the fully parameterized
step (including seeds) to a pipeline record, so the final grouping can be
reproduced exactly, replayed on other databases, and audited.

Grouping model: each object points to at most one group; groups form a
tree via parent references, and an object's exported path is its group's
ancestry. Cluster and manual steps subdivide their whole input subtree;
filter steps refine only the not-yet-subdivided members of their input
(so a pass-everything filter inserted between steps never disturbs the
final grouping). A clustering step can instead record its result as a
*tag dimension* (used for the left/right side split): tags do not change
the tree, but at finalize every leaf is subdivided by tag value, with
the tag inserted into the path right after the tagged group's segment.
"""

from __future__ import annotations

import copy
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

from .clustering import PARTITIONERS, FcmConfig, hard_assign
from .data import ObjectDatabase, Selection
from .errors import FeatureError, PipelineError, StepSkipped
from .features import ColumnNorm, FeatureSpec, build_feature_matrix, feature_vector
from .filters import FilterSpec, apply_filter

RECORD_FORMAT = "trajkd-pipeline"
SCHEMA_VERSION = 1

EXCLUDED_LABEL = "__excluded__"
UNASSIGNED_LABEL = "__unassigned__"
RESERVED_NAMES = {EXCLUDED_LABEL, UNASSIGNED_LABEL}

STEP_KINDS = (
    "filter", "cluster", "manual", "merge", "split_recluster", "dissolve",
    "exclude",
)
MANUAL_POLICIES = ("by-id", "pending")


def _check_group_name(name: str) -> str:
    if not name or "/" in name or name in RESERVED_NAMES:
        raise PipelineError(f"invalid group name {name!r}")
    return name


# --- steps ---------------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    """One recorded pipeline step.

    ``input_group`` is None for the whole-database selection. ``note``
    carries the analyst's free-text problem statement for the step.
    ``params`` holds the kind-specific payload (see ``to_dict``).
    """

    step_id: str
    kind: str
    input_group: str | None = None
    note: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise PipelineError(f"unknown step kind {self.kind!r}")

    def to_dict(self) -> dict:
        d: dict = {"step_id": self.step_id, "kind": self.kind, "note": self.note,
                   "input": self.input_group}
        k = self.kind
        p = self.params
        if k == "filter":
            d["spec"] = p["spec"].to_dict()
            d["output"] = p["output"]
        elif k in ("cluster", "split_recluster"):
            d["features"] = [s.to_dict() for s in p["features"]]
            d["method"] = p.get("method", "fcm")
            d["config"] = p["config"].to_dict()
            d["outputs"] = list(p["outputs"])
            if p.get("as_tag"):
                d["as_tag"] = True
                d["tag_dimension"] = p["tag_dimension"]
        elif k == "manual":
            d["labels"] = dict(sorted(p["labels"].items()))
            d["default_group"] = p.get("default_group")
        elif k == "merge":
            d["sources"] = list(p["sources"])
            d["output"] = p["output"]
        elif k == "dissolve":
            d["group"] = p["group"]
        elif k == "exclude":
            d["groups"] = list(p["groups"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Step":
        kind = d.get("kind")
        params: dict = {}
        if kind == "filter":
            params = {"spec": FilterSpec.from_dict(d["spec"]), "output": d["output"]}
        elif kind in ("cluster", "split_recluster"):
            params = {
                "features": [FeatureSpec.from_dict(s) for s in d["features"]],
                "method": d.get("method", "fcm"),
                "config": FcmConfig.from_dict(d["config"]),
                "outputs": list(d["outputs"]),
            }
            if d.get("as_tag"):
                params["as_tag"] = True
                params["tag_dimension"] = d["tag_dimension"]
        elif kind == "manual":
            params = {"labels": dict(d["labels"]),
                      "default_group": d.get("default_group")}
        elif kind == "merge":
            params = {"sources": list(d["sources"]), "output": d["output"]}
        elif kind == "dissolve":
            params = {"group": d["group"]}
        elif kind == "exclude":
            params = {"groups": list(d["groups"])}
        else:
            raise PipelineError(f"unknown step kind {kind!r}")
        return cls(step_id=d["step_id"], kind=kind, input_group=d.get("input"),
                   note=d.get("note", ""), params=params)

    def output_names(self) -> list[str]:
        """Group or tag-value names this step defines."""
        k, p = self.kind, self.params
        if k == "filter":
            return [p["output"]]
        if k in ("cluster", "split_recluster"):
            return list(p["outputs"])
        if k == "manual":
            names = sorted(set(p["labels"].values()))
            if p.get("default_group"):
                names.append(p["default_group"])
            return names
        if k == "merge":
            return [p["output"]]
        return []

    def consumed_groups(self) -> list[str]:
        names = [self.input_group] if self.input_group else []
        if self.kind == "merge":
            names.extend(self.params["sources"])
        elif self.kind == "dissolve":
            names.append(self.params["group"])
        elif self.kind == "exclude":
            names.extend(self.params["groups"])
        return names


def filter_step(spec: FilterSpec, output: str, input_group: str | None = None,
                note: str = "", step_id: str = "") -> Step:
    return Step(step_id=step_id, kind="filter", input_group=input_group,
                note=note, params={"spec": spec, "output": _check_group_name(output)})


def cluster_step(features: Sequence[FeatureSpec], config: FcmConfig,
                 outputs: Sequence[str], input_group: str | None = None,
                 note: str = "", as_tag: bool = False,
                 tag_dimension: str | None = None, method: str = "fcm",
                 step_id: str = "", kind: str = "cluster") -> Step:
    params: dict = {"features": list(features), "config": config,
                    "outputs": [_check_group_name(n) for n in outputs],
                    "method": method}
    if as_tag:
        if not tag_dimension:
            raise PipelineError("a tag clustering needs a tag_dimension name")
        params["as_tag"] = True
        params["tag_dimension"] = tag_dimension
    return Step(step_id=step_id, kind=kind, input_group=input_group, note=note,
                params=params)


def manual_step(labels: dict[str, str], input_group: str | None = None,
                default_group: str | None = None, note: str = "",
                step_id: str = "") -> Step:
    for name in labels.values():
        _check_group_name(name)
    if default_group:
        _check_group_name(default_group)
    return Step(step_id=step_id, kind="manual", input_group=input_group, note=note,
                params={"labels": dict(labels), "default_group": default_group})


def merge_step(sources: Sequence[str], output: str, note: str = "",
               step_id: str = "") -> Step:
    return Step(step_id=step_id, kind="merge", note=note,
                params={"sources": list(sources),
                        "output": _check_group_name(output)})


def dissolve_step(group: str, note: str = "", step_id: str = "") -> Step:
    return Step(step_id=step_id, kind="dissolve", note=note,
                params={"group": group})


def exclude_step(groups: Sequence[str], note: str = "", step_id: str = "") -> Step:
    return Step(step_id=step_id, kind="exclude", note=note,
                params={"groups": list(groups)})


# --- grouping state -------------------------------------------------------------


@dataclass
class GroupInfo:
    name: str
    parent: str | None
    created_by: str
    center: np.ndarray | None = None
    cluster_step: str | None = None


@dataclass
class TagDimension:
    dimension: str
    anchor_group: str | None
    values: dict[str, str]
    step_id: str


@dataclass
class ClusterSpace:
    """Feature space of one clustering step, kept so dissolved members can
    be re-assigned to the nearest remaining sibling center."""

    step_id: str
    features: list[FeatureSpec]
    norms: tuple[ColumnNorm, ...]
    centers: dict[str, np.ndarray]


@dataclass
class GroupingState:
    groups: dict[str, GroupInfo] = field(default_factory=dict)
    assignment: dict[str, str] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)
    excluded: dict[str, str] = field(default_factory=dict)
    tags: dict[str, TagDimension] = field(default_factory=dict)
    cluster_spaces: dict[str, ClusterSpace] = field(default_factory=dict)
    last_cluster_step: dict[str, str] = field(default_factory=dict)

    def clone(self) -> "GroupingState":
        return copy.deepcopy(self)

    def used_names(self) -> set[str]:
        names = set(self.groups)
        for dim in self.tags.values():
            names.update(dim.values.values())
        return names

    def path(self, group: str) -> tuple[str, ...]:
        parts: list[str] = []
        cur: str | None = group
        while cur is not None:
            info = self.groups.get(cur)
            if info is None:
                raise PipelineError(f"unknown group {cur!r}")
            parts.append(cur)
            cur = info.parent
        return tuple(reversed(parts))

    def children(self, group: str) -> list[str]:
        return [g for g, info in self.groups.items() if info.parent == group]

    def is_leaf(self, group: str) -> bool:
        return not self.children(group)

    def ancestry_contains(self, oid: str, group: str) -> bool:
        cur = self.assignment.get(oid)
        while cur is not None:
            if cur == group:
                return True
            cur = self.groups[cur].parent
        return False

    def members(self, group: str) -> list[str]:
        if group not in self.groups:
            raise PipelineError(f"unknown group {group!r}")
        return sorted(o for o in self.assignment if self.ancestry_contains(o, group))

    def tag_anchors(self) -> set[str]:
        return {d.anchor_group for d in self.tags.values() if d.anchor_group}


# --- step execution -------------------------------------------------------------


@dataclass
class StepResult:
    step_id: str
    kind: str
    status: str  # "applied" | "skipped" | "pending"
    input_size: int = 0
    outputs: dict[str, int] = field(default_factory=dict)
    unmatched_manual: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "step_id": self.step_id, "kind": self.kind, "status": self.status,
            "input_size": self.input_size, "outputs": self.outputs,
            "unmatched_manual": self.unmatched_manual, "dropped": self.dropped,
            "reason": self.reason,
        }


def _resolve_input(state: GroupingState, db: ObjectDatabase,
                   input_group: str | None) -> list[str]:
    if input_group is None:
        return sorted(o for o in db.object_ids if o not in state.excluded)
    return state.members(input_group)


def _resolve_direct(state: GroupingState, db: ObjectDatabase,
                    input_group: str | None) -> list[str]:
    """Objects not yet allocated further: unassigned ones for the whole
    database, direct members for a group. Filters use this so that an
    all-pass filter never disturbs groups refined by later steps."""
    if input_group is None:
        return sorted(o for o in db.object_ids
                      if o not in state.excluded and o not in state.assignment)
    if input_group not in state.groups:
        raise PipelineError(f"unknown group {input_group!r}")
    return sorted(o for o, g in state.assignment.items() if g == input_group)


def _require_fresh_names(state: GroupingState, names: Iterable[str]) -> None:
    used = state.used_names()
    fresh: set[str] = set()
    for name in names:
        _check_group_name(name)
        if name in used or name in fresh:
            raise PipelineError(f"group name {name!r} already in use")
        fresh.add(name)


def execute_step(
    state: GroupingState,
    step: Step,
    db: ObjectDatabase,
    replay_mode: bool = False,
    manual_policy: str = "by-id",
) -> tuple[GroupingState, StepResult]:
    """Apply one step to a grouping state, returning the new state.

    In replay mode, inapplicable steps (empty input, too few points to
    cluster) raise :class:`StepSkipped` instead of hard errors, and manual
    steps follow ``manual_policy``.
    """
    state = state.clone()
    result = StepResult(step_id=step.step_id, kind=step.kind, status="applied")
    kind = step.kind

    # a group may be missing during replay because its producing step was
    # skipped on this database; that makes this step inapplicable, not the
    # record invalid
    missing = [g for g in step.consumed_groups() if g not in state.groups]
    if missing:
        msg = f"step {step.step_id!r}: group {missing[0]!r} does not exist"
        if replay_mode:
            raise StepSkipped(msg)
        raise PipelineError(msg)

    if kind in ("filter", "cluster", "split_recluster", "manual"):
        if kind == "filter":
            members = _resolve_direct(state, db, step.input_group)
        else:
            members = _resolve_input(state, db, step.input_group)
        result.input_size = len(members)
        if not members:
            raise StepSkipped(
                f"step {step.step_id!r}: input "
                f"{step.input_group or 'database'!r} is empty"
            )

    if kind == "filter":
        name = step.params["output"]
        _require_fresh_names(state, [name])
        selection = Selection(db_id=db.db_id, object_ids=tuple(members))
        kept = apply_filter(db, selection, step.params["spec"]).object_ids
        state.groups[name] = GroupInfo(name=name, parent=step.input_group,
                                       created_by=step.step_id)
        for oid in kept:
            state.assignment[oid] = name
            state.provenance[oid] = step.step_id
        result.outputs = {name: len(kept)}
        return state, result

    if kind in ("cluster", "split_recluster"):
        p = step.params
        outputs = p["outputs"]
        config: FcmConfig = p["config"]
        if config.c != len(outputs):
            raise PipelineError(
                f"step {step.step_id!r}: {config.c} clusters but "
                f"{len(outputs)} output names"
            )
        if kind == "split_recluster":
            if step.input_group is None:
                raise PipelineError("split_recluster needs a group input")
            if not state.is_leaf(step.input_group):
                raise PipelineError(
                    f"split_recluster target {step.input_group!r} is not a leaf"
                )
        as_tag = bool(p.get("as_tag"))
        if as_tag:
            dim = p["tag_dimension"]
            if dim in state.tags:
                raise PipelineError(f"tag dimension {dim!r} already exists")
        _require_fresh_names(state, outputs)
        method = p.get("method", "fcm")
        if method not in PARTITIONERS:
            raise PipelineError(f"unknown partitioner {method!r}")
        selection = Selection(db_id=db.db_id, object_ids=tuple(members))
        try:
            matrix = build_feature_matrix(db, selection, p["features"])
        except FeatureError as exc:
            if replay_mode:
                raise StepSkipped(f"step {step.step_id!r}: {exc}") from exc
            raise
        result.dropped = [oid for oid, _ in matrix.dropped]
        if len(matrix.object_ids) < config.c:
            msg = (f"step {step.step_id!r}: {len(matrix.object_ids)} usable "
                   f"objects for {config.c} clusters")
            if replay_mode:
                raise StepSkipped(msg)
            raise PipelineError(msg)
        partition = PARTITIONERS[method](matrix.values, config.to_dict())
        labels = hard_assign(partition)

        if as_tag:
            values = {oid: outputs[lab]
                      for oid, lab in zip(matrix.object_ids, labels)}
            state.tags[p["tag_dimension"]] = TagDimension(
                dimension=p["tag_dimension"], anchor_group=step.input_group,
                values=values, step_id=step.step_id,
            )
            counts = {name: int((labels == i).sum())
                      for i, name in enumerate(outputs)}
            result.outputs = counts
            return state, result

        centers = {name: partition.centers[i].copy()
                   for i, name in enumerate(outputs)}
        for i, name in enumerate(outputs):
            state.groups[name] = GroupInfo(
                name=name, parent=step.input_group, created_by=step.step_id,
                center=centers[name], cluster_step=step.step_id,
            )
        for oid, lab in zip(matrix.object_ids, labels):
            state.assignment[oid] = outputs[lab]
            state.provenance[oid] = step.step_id
            state.last_cluster_step[oid] = step.step_id
        state.cluster_spaces[step.step_id] = ClusterSpace(
            step_id=step.step_id, features=list(p["features"]),
            norms=matrix.norms, centers=centers,
        )
        result.outputs = {name: int((labels == i).sum())
                          for i, name in enumerate(outputs)}
        return state, result

    if kind == "manual":
        p = step.params
        labels: dict[str, str] = p["labels"]
        default_group = p.get("default_group")
        names = sorted(set(labels.values()))
        if default_group:
            names = sorted(set(names) | {default_group})
        _require_fresh_names(state, names)
        member_set = set(members)
        unmatched = sorted(set(labels) - member_set)
        if unmatched and not replay_mode:
            raise PipelineError(
                f"step {step.step_id!r}: labels reference objects outside the "
                f"input group: {unmatched[:5]}"
            )
        pending = replay_mode and manual_policy == "pending"
        for name in names:
            state.groups[name] = GroupInfo(name=name, parent=step.input_group,
                                           created_by=step.step_id)
        counts = {name: 0 for name in names}
        for oid in members:
            target = None if pending else labels.get(oid, default_group)
            if target is None:
                state.assignment.pop(oid, None)
                state.provenance.pop(oid, None)
            else:
                state.assignment[oid] = target
                state.provenance[oid] = step.step_id
                counts[target] += 1
        result.outputs = counts
        result.unmatched_manual = unmatched
        if pending:
            result.status = "pending"
        return state, result

    if kind == "merge":
        p = step.params
        sources = p["sources"]
        output = p["output"]
        if not sources:
            raise PipelineError("merge needs at least one source group")
        anchors = state.tag_anchors()
        for g in sources:
            if g not in state.groups:
                raise PipelineError(f"merge source {g!r} does not exist")
            if not state.is_leaf(g):
                raise PipelineError(f"merge source {g!r} is not a leaf")
            if g in anchors:
                raise PipelineError(f"merge source {g!r} anchors a tag dimension")
        _require_fresh_names(state, [output])
        moved = [o for o in state.assignment if state.assignment[o] in sources]
        result.input_size = len(moved)
        state.groups[output] = GroupInfo(name=output, parent=None,
                                         created_by=step.step_id)
        for oid in moved:
            state.assignment[oid] = output
            state.provenance[oid] = step.step_id
        for g in sources:
            del state.groups[g]
        result.outputs = {output: len(moved)}
        return state, result

    if kind == "dissolve":
        group = step.params["group"]
        if group not in state.groups:
            raise PipelineError(f"dissolve target {group!r} does not exist")
        if not state.is_leaf(group):
            raise PipelineError(f"dissolve target {group!r} is not a leaf")
        if group in state.tag_anchors():
            raise PipelineError(f"dissolve target {group!r} anchors a tag dimension")
        moved = sorted(o for o, g in state.assignment.items() if g == group)
        result.input_size = len(moved)
        counts: dict[str, int] = {}
        for oid in moved:
            origin = state.last_cluster_step.get(oid)
            if origin is None or origin not in state.cluster_spaces:
                msg = (f"step {step.step_id!r}: object {oid!r} has no cluster "
                       "centers to redistribute to")
                if replay_mode:
                    raise StepSkipped(msg)
                raise PipelineError(msg)
            space = state.cluster_spaces[origin]
            candidates = sorted(
                g for g in state.groups
                if g != group and state.groups[g].cluster_step == origin
                and state.is_leaf(g) and g in space.centers
            )
            if not candidates:
                msg = (f"step {step.step_id!r}: no remaining sibling cluster "
                       f"for object {oid!r}")
                if replay_mode:
                    raise StepSkipped(msg)
                raise PipelineError(msg)
            vec = feature_vector(db, oid, space.features, space.norms)
            dists = [float(np.linalg.norm(vec - space.centers[g]))
                     for g in candidates]
            winner = candidates[int(np.argmin(dists))]
            state.assignment[oid] = winner
            state.provenance[oid] = step.step_id
            counts[winner] = counts.get(winner, 0) + 1
        del state.groups[group]
        result.outputs = counts
        return state, result

    if kind == "exclude":
        groups = step.params["groups"]
        if not groups:
            raise PipelineError("exclude needs at least one group")
        anchors = state.tag_anchors()
        for g in groups:
            if g not in state.groups:
                raise PipelineError(f"exclude target {g!r} does not exist")
            if not state.is_leaf(g):
                raise PipelineError(f"exclude target {g!r} is not a leaf")
            if g in anchors:
                raise PipelineError(f"exclude target {g!r} anchors a tag dimension")
        moved = sorted(o for o, g in state.assignment.items() if g in set(groups))
        result.input_size = len(moved)
        for oid in moved:
            state.excluded[oid] = step.step_id
            del state.assignment[oid]
            state.provenance.pop(oid, None)
        for g in groups:
            del state.groups[g]
        result.outputs = {EXCLUDED_LABEL: len(moved)}
        return state, result

    raise PipelineError(f"unknown step kind {kind!r}")


# --- pipeline record ------------------------------------------------------------


@dataclass
class PipelineRecord:
    """The serialized, replayable sequence of steps for one source database."""

    source_db_id: str
    steps: list[Step] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": RECORD_FORMAT,
            "schema_version": SCHEMA_VERSION,
            "source_db_id": self.source_db_id,
            "steps": [s.to_dict() for s in self.steps],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineRecord":
        if d.get("format") != RECORD_FORMAT:
            raise PipelineError(f"not a pipeline record: format={d.get('format')!r}")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise PipelineError(
                f"unsupported record schema_version {d.get('schema_version')!r}"
            )
        rec = cls(source_db_id=d["source_db_id"],
                  steps=[Step.from_dict(s) for s in d["steps"]])
        rec.validate()
        return rec

    @classmethod
    def from_json(cls, text: str) -> "PipelineRecord":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (sorted keys, compact separators);
        stable across platforms."""
        canonical = json.dumps(self.to_dict(), sort_keys=True,
                               separators=(",", ":"), ensure_ascii=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def next_step_id(self) -> str:
        used = {s.step_id for s in self.steps}
        n = len(self.steps) + 1
        while f"s{n}" in used:
            n += 1
        return f"s{n}"

    def validate(self) -> None:
        """Check topological consistency: every consumed group was produced by
        an earlier step, ids and output names are unique."""
        defined: set[str] = set()
        ids: set[str] = set()
        for step in self.steps:
            if step.step_id in ids:
                raise PipelineError(f"duplicate step_id {step.step_id!r}")
            ids.add(step.step_id)
            for g in step.consumed_groups():
                if g not in defined:
                    raise PipelineError(
                        f"step {step.step_id!r} consumes unknown group {g!r}"
                    )
            for name in step.output_names():
                if name in defined:
                    raise PipelineError(
                        f"step {step.step_id!r} redefines group {name!r}"
                    )
                defined.add(name)


def insert_step(record: PipelineRecord, position: int, step: Step) -> PipelineRecord:
    """Return a new record with the step inserted; downstream steps are
    revalidated (a step consuming a group produced later is an error)."""
    if not 0 <= position <= len(record.steps):
        raise PipelineError(f"position {position} out of range")
    if not step.step_id:
        step = replace(step, step_id=record.next_step_id())
    new = PipelineRecord(source_db_id=record.source_db_id,
                         steps=record.steps[:position] + [step] + record.steps[position:])
    new.validate()
    return new


# --- knowledge database -----------------------------------------------------------


@dataclass
class KnowledgeDatabase:
    """Final object -> leaf-group-path mapping with provenance.

    Every object of the source database appears in exactly one of: a leaf
    group, the excluded set, or the unassigned set.
    """

    source_db_id: str
    assignments: dict[str, tuple[str, ...]]
    provenance: dict[str, str]
    excluded: dict[str, str]
    unassigned: frozenset[str]
    pipeline_hash: str

    def __post_init__(self):
        grouped = set(self.assignments)
        excl = set(self.excluded)
        unas = set(self.unassigned)
        if grouped & excl or grouped & unas or excl & unas:
            raise PipelineError("knowledge database buckets overlap")

    @property
    def all_ids(self) -> set[str]:
        return set(self.assignments) | set(self.excluded) | set(self.unassigned)

    def leaf_groups(self) -> dict[tuple[str, ...], list[str]]:
        groups: dict[tuple[str, ...], list[str]] = {}
        for oid, path in self.assignments.items():
            groups.setdefault(path, []).append(oid)
        for ids in groups.values():
            ids.sort()
        return groups

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        buf.write("object_id,status,group_path,provenance_step\n")
        rows = []
        for oid, path in self.assignments.items():
            rows.append((oid, "grouped", "/".join(path), self.provenance.get(oid, "")))
        for oid, step in self.excluded.items():
            rows.append((oid, "excluded", "", step))
        for oid in self.unassigned:
            rows.append((oid, "unassigned", "", ""))
        for row in sorted(rows):
            buf.write(",".join(row) + "\n")
        return buf.getvalue().encode("utf-8")

    def to_dict(self) -> dict:
        return {
            "format": "trajkd-knowledge",
            "schema_version": SCHEMA_VERSION,
            "source_db_id": self.source_db_id,
            "pipeline_hash": self.pipeline_hash,
            "assignments": {o: list(p) for o, p in sorted(self.assignments.items())},
            "provenance": dict(sorted(self.provenance.items())),
            "excluded": dict(sorted(self.excluded.items())),
            "unassigned": sorted(self.unassigned),
        }

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "KnowledgeDatabase":
        return cls(
            source_db_id=d["source_db_id"],
            assignments={o: tuple(p) for o, p in d["assignments"].items()},
            provenance=dict(d["provenance"]),
            excluded=dict(d["excluded"]),
            unassigned=frozenset(d["unassigned"]),
            pipeline_hash=d["pipeline_hash"],
        )

    @classmethod
    def from_json(cls, text: str) -> "KnowledgeDatabase":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_csv(cls, text: str, source_db_id: str = "",
                 pipeline_hash: str = "") -> "KnowledgeDatabase":
        """Parse the CSV export (provenance included, hash not recoverable)."""
        lines = text.strip().splitlines()
        if not lines or lines[0] != "object_id,status,group_path,provenance_step":
            raise PipelineError("not a knowledge database CSV export")
        assignments: dict[str, tuple[str, ...]] = {}
        provenance: dict[str, str] = {}
        excluded: dict[str, str] = {}
        unassigned: set[str] = set()
        for line in lines[1:]:
            oid, status, path, step = line.split(",")
            if status == "grouped":
                assignments[oid] = tuple(path.split("/"))
                provenance[oid] = step
            elif status == "excluded":
                excluded[oid] = step
            elif status == "unassigned":
                unassigned.add(oid)
            else:
                raise PipelineError(f"unknown status {status!r} for {oid!r}")
        return cls(source_db_id=source_db_id, assignments=assignments,
                   provenance=provenance, excluded=excluded,
                   unassigned=frozenset(unassigned), pipeline_hash=pipeline_hash)


def _final_path(state: GroupingState, oid: str) -> tuple[str, ...]:
    path = list(state.path(state.assignment[oid]))
    # subdivide by tag dimensions: the value slots in right after the
    # tagged group's segment
    for dim_name in sorted(state.tags):
        dim = state.tags[dim_name]
        value = dim.values.get(oid)
        if value is None:
            continue
        if dim.anchor_group is None:
            path.insert(0, value)
        elif dim.anchor_group in path:
            path.insert(path.index(dim.anchor_group) + 1, value)
    return tuple(path)


def build_knowledge_db(
    state: GroupingState, db: ObjectDatabase, record: PipelineRecord
) -> KnowledgeDatabase:
    assignments: dict[str, tuple[str, ...]] = {}
    provenance: dict[str, str] = {}
    unassigned: set[str] = set()
    for oid in db.object_ids:
        if oid in state.excluded:
            continue
        if oid in state.assignment:
            assignments[oid] = _final_path(state, oid)
            provenance[oid] = state.provenance.get(oid, "")
        else:
            unassigned.add(oid)
    kdb = KnowledgeDatabase(
        source_db_id=db.db_id,
        assignments=assignments,
        provenance=provenance,
        excluded=dict(state.excluded),
        unassigned=frozenset(unassigned),
        pipeline_hash=record.digest(),
    )
    if kdb.all_ids != set(db.object_ids):
        raise PipelineError("knowledge database does not partition the objects")
    return kdb


# --- session ---------------------------------------------------------------------


@dataclass
class GroupSummary:
    name: str
    path: tuple[str, ...]
    parent: str | None
    created_by: str
    size: int
    is_leaf: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "path": list(self.path), "parent": self.parent,
                "created_by": self.created_by, "size": self.size,
                "is_leaf": self.is_leaf}


class Session:
    """One analyst's live KD run over a database.

    Commits and undos must be externally serialized (one writer per
    session); every mutation appends to the session's record, and undo
    pops both the last step and the saved state snapshot.
    """

    def __init__(self, db: ObjectDatabase):
        self.db = db
        self.record = PipelineRecord(source_db_id=db.db_id)
        self._states: list[GroupingState] = [GroupingState()]
        self._results: list[StepResult] = []
        self.revision = 0

    @property
    def state(self) -> GroupingState:
        return self._states[-1]

    def commit_step(self, step: Step) -> StepResult:
        if not step.step_id:
            step = replace(step, step_id=self.record.next_step_id())
        new_state, result = execute_step(self.state, step, self.db)
        self.record.steps.append(step)
        self.record.validate()
        self._states.append(new_state)
        self._results.append(result)
        self.revision += 1
        return result

    def preview_step(self, step: Step) -> StepResult:
        """Run a step against the current state without committing it."""
        if not step.step_id:
            step = replace(step, step_id=self.record.next_step_id())
        _, result = execute_step(self.state, step, self.db)
        return result

    def undo(self) -> None:
        if not self.record.steps:
            raise PipelineError("nothing to undo")
        self.record.steps.pop()
        self._states.pop()
        self._results.pop()
        self.revision += 1

    def grouping(self) -> list[GroupSummary]:
        state = self.state
        sizes: dict[str, int] = {g: 0 for g in state.groups}
        for oid, g in state.assignment.items():
            cur: str | None = g
            while cur is not None:
                sizes[cur] += 1
                cur = state.groups[cur].parent
        out = []
        for name in sorted(state.groups):
            info = state.groups[name]
            out.append(GroupSummary(
                name=name, path=state.path(name), parent=info.parent,
                created_by=info.created_by, size=sizes[name],
                is_leaf=state.is_leaf(name),
            ))
        return out

    def counts(self) -> dict:
        state = self.state
        return {
            "objects": len(self.db),
            "grouped": len(state.assignment),
            "excluded": len(state.excluded),
            "unassigned": len(self.db) - len(state.assignment) - len(state.excluded),
        }

    def finalize(self) -> KnowledgeDatabase:
        return build_knowledge_db(self.state, self.db, self.record)


def open_session(db: ObjectDatabase) -> Session:
    return Session(db)


# --- replay ----------------------------------------------------------------------


@dataclass
class ReplayReport:
    steps: list[StepResult] = field(default_factory=list)

    @property
    def skipped(self) -> list[StepResult]:
        return [s for s in self.steps if s.status == "skipped"]

    def to_dict(self) -> dict:
        return {"steps": [s.to_dict() for s in self.steps]}


def _patch_value(target: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    cur = target
    for key in parts[:-1]:
        if isinstance(cur, list):
            cur = cur[int(key)]
        else:
            if key not in cur:
                raise PipelineError(f"override path {dotted!r} not found")
            cur = cur[key]
    last = parts[-1]
    if isinstance(cur, list):
        cur[int(last)] = value
    else:
        if last not in cur:
            raise PipelineError(f"override path {dotted!r} not found")
        cur[last] = value


def apply_overrides(record: PipelineRecord,
                    overrides: dict[str, dict[str, Any]] | None) -> PipelineRecord:
    """Patch per-step parameters (dotted paths into the serialized step)."""
    if not overrides:
        return record
    by_id = {s.step_id for s in record.steps}
    for sid in overrides:
        if sid not in by_id:
            raise PipelineError(f"override references unknown step {sid!r}")
    steps = []
    for step in record.steps:
        if step.step_id in overrides:
            payload = step.to_dict()
            for dotted, value in sorted(overrides[step.step_id].items()):
                _patch_value(payload, dotted, value)
            step = Step.from_dict(payload)
        steps.append(step)
    return PipelineRecord(source_db_id=record.source_db_id, steps=steps)


def replay(
    record: PipelineRecord,
    db: ObjectDatabase,
    overrides: dict[str, dict[str, Any]] | None = None,
    manual_policy: str = "by-id",
    strict: bool = False,
) -> tuple[KnowledgeDatabase, ReplayReport]:
    """Re-run a recorded pipeline on a database.

    Deterministic given (record, db, overrides, seeds). Steps that cannot
    apply (e.g. an empty input group on a different database) are skipped
    and flagged in the report unless ``strict``.
    """
    if manual_policy not in MANUAL_POLICIES:
        raise PipelineError(f"unknown manual policy {manual_policy!r}")
    patched = apply_overrides(record, overrides)
    patched.validate()
    state = GroupingState()
    report = ReplayReport()
    for step in patched.steps:
        try:
            state, result = execute_step(state, step, db, replay_mode=True,
                                         manual_policy=manual_policy)
        except StepSkipped as exc:
            if strict:
                raise
            result = StepResult(step_id=step.step_id, kind=step.kind,
                                status="skipped", reason=str(exc))
        report.steps.append(result)
    kdb = build_knowledge_db(state, db, patched)
    return kdb, report

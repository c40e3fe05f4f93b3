"""Per-group feature statistics and comparison between knowledge databases.

Group comparison reports a contingency table, the fraction of object
pairs on which two groupings agree (same-group vs different-group), and
the adjusted Rand index. All three are invariant under relabeling groups,
so they compare groupings produced with arbitrary naming.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import ObjectDatabase, Selection
from .errors import FeatureError, TrajkdError
from .features import FeatureSpec, evaluate_feature
from .pipeline import EXCLUDED_LABEL, UNASSIGNED_LABEL, KnowledgeDatabase


@dataclass
class GroupFeatureStats:
    group: str
    count: int
    mean: float | None = None
    std: float | None = None
    min: float | None = None
    max: float | None = None
    median: float | None = None
    bin_edges: list[float] = field(default_factory=list)
    bin_counts: list[int] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "group": self.group, "count": self.count, "mean": self.mean,
            "std": self.std, "min": self.min, "max": self.max,
            "median": self.median, "bin_edges": self.bin_edges,
            "bin_counts": self.bin_counts, "skipped": self.skipped,
        }


@dataclass
class GroupStats:
    """Statistics of one feature per leaf group plus the excluded and
    unassigned pseudo-groups."""

    feature: FeatureSpec
    bins: int
    groups: list[GroupFeatureStats]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.to_dict(),
            "bins": self.bins,
            "groups": [g.to_dict() for g in self.groups],
        }


def _group_members(kdb: KnowledgeDatabase) -> dict[str, list[str]]:
    members: dict[str, list[str]] = {}
    for path, ids in sorted(kdb.leaf_groups().items()):
        members["/".join(path)] = sorted(ids)
    members[EXCLUDED_LABEL] = sorted(kdb.excluded)
    members[UNASSIGNED_LABEL] = sorted(kdb.unassigned)
    return members


def group_stats(
    db: ObjectDatabase, kdb: KnowledgeDatabase, feature: FeatureSpec, bins: int = 10
) -> GroupStats:
    """Moments and a histogram of one feature for every group of a kdb."""
    if kdb.source_db_id != db.db_id:
        raise TrajkdError(
            f"knowledge database belongs to {kdb.source_db_id!r}, not {db.db_id!r}"
        )
    if bins < 1:
        raise TrajkdError("bins must be >= 1")
    if len(feature.column_names) != 1:
        raise TrajkdError("group statistics need a scalar feature")

    out: list[GroupFeatureStats] = []
    for name, ids in _group_members(kdb).items():
        values: list[float] = []
        skipped: list[str] = []
        for oid in ids:
            try:
                values.append(float(evaluate_feature(feature, db.trajectories[oid], db)[0]))
            except FeatureError as exc:
                if feature.skip_on_error:
                    skipped.append(oid)
                    continue
                raise FeatureError(
                    f"feature failed for object {oid!r} in group {name!r}: {exc}",
                    object_id=oid,
                ) from exc
        stats = GroupFeatureStats(group=name, count=len(values), skipped=skipped)
        if values:
            arr = np.asarray(values)
            stats.mean = float(arr.mean())
            stats.std = float(arr.std())
            stats.min = float(arr.min())
            stats.max = float(arr.max())
            stats.median = float(np.median(arr))
            counts, edges = np.histogram(arr, bins=bins, range=(stats.min, stats.max))
            stats.bin_edges = [float(e) for e in edges]
            stats.bin_counts = [int(c) for c in counts]
        out.append(stats)
    return GroupStats(feature=feature, bins=bins, groups=out)


# --- comparison ---------------------------------------------------------------


@dataclass
class GroupMatch:
    group: str
    size: int
    best_match: str | None
    overlap: int
    size_delta: int

    def to_dict(self) -> dict:
        return {"group": self.group, "size": self.size,
                "best_match": self.best_match, "overlap": self.overlap,
                "size_delta": self.size_delta}


@dataclass
class KdbComparison:
    groups_a: list[str]
    groups_b: list[str]
    contingency: np.ndarray
    agreement: float
    ari: float
    matches: list[GroupMatch]
    common_ids: int
    only_in_a: int
    only_in_b: int

    def to_dict(self) -> dict:
        return {
            "groups_a": self.groups_a,
            "groups_b": self.groups_b,
            "contingency": self.contingency.tolist(),
            "agreement": self.agreement,
            "ari": self.ari,
            "matches": [m.to_dict() for m in self.matches],
            "common_ids": self.common_ids,
            "only_in_a": self.only_in_a,
            "only_in_b": self.only_in_b,
        }


def _labels_at_depth(kdb: KnowledgeDatabase, depth: int | None) -> dict[str, str]:
    labels: dict[str, str] = {}
    for oid, path in kdb.assignments.items():
        cut = path if depth is None else path[:depth]
        labels[oid] = "/".join(cut)
    for oid in kdb.excluded:
        labels[oid] = EXCLUDED_LABEL
    for oid in kdb.unassigned:
        labels[oid] = UNASSIGNED_LABEL
    return labels


def _comb2(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float((x * (x - 1) / 2.0).sum())


def compare_labelings(labels_a: dict[str, str], labels_b: dict[str, str]) -> KdbComparison:
    common = sorted(set(labels_a) & set(labels_b))
    if not common:
        raise TrajkdError("no common object_ids to compare")
    names_a = sorted({labels_a[o] for o in common})
    names_b = sorted({labels_b[o] for o in common})
    index_a = {g: i for i, g in enumerate(names_a)}
    index_b = {g: i for i, g in enumerate(names_b)}
    table = np.zeros((len(names_a), len(names_b)), dtype=np.int64)
    for oid in common:
        table[index_a[labels_a[oid]], index_b[labels_b[oid]]] += 1

    n = len(common)
    pairs = n * (n - 1) / 2.0
    together_ab = _comb2(table)
    together_a = _comb2(table.sum(axis=1))
    together_b = _comb2(table.sum(axis=0))
    if pairs == 0:
        agreement = 1.0
    else:
        agree_same = together_ab
        agree_diff = pairs - together_a - together_b + together_ab
        agreement = (agree_same + agree_diff) / pairs

    expected = together_a * together_b / pairs if pairs else 0.0
    max_index = (together_a + together_b) / 2.0
    denom = max_index - expected
    ari = 1.0 if denom == 0.0 else (together_ab - expected) / denom

    matches = []
    row_sums = table.sum(axis=1)
    col_sums = table.sum(axis=0)
    for i, g in enumerate(names_a):
        if row_sums[i] == 0:
            matches.append(GroupMatch(g, 0, None, 0, 0))
            continue
        j = int(np.argmax(table[i]))
        matches.append(
            GroupMatch(
                group=g, size=int(row_sums[i]), best_match=names_b[j],
                overlap=int(table[i, j]),
                size_delta=int(row_sums[i]) - int(col_sums[j]),
            )
        )
    return KdbComparison(
        groups_a=names_a, groups_b=names_b, contingency=table,
        agreement=float(agreement), ari=float(ari), matches=matches,
        common_ids=n,
        only_in_a=len(set(labels_a) - set(labels_b)),
        only_in_b=len(set(labels_b) - set(labels_a)),
    )


def compare_kdbs(
    kdb_a: KnowledgeDatabase, kdb_b: KnowledgeDatabase, depth: int | None = None
) -> KdbComparison:
    """Compare two knowledge databases over their common objects.

    Comparison is at leaf level by default; ``depth`` truncates group
    paths first (e.g. depth=1 compares only top-level groups). Excluded
    and unassigned objects form their own pseudo-groups.
    """
    return compare_labelings(
        _labels_at_depth(kdb_a, depth), _labels_at_depth(kdb_b, depth)
    )

"""trajkd: interactive knowledge discovery for spatio-temporal trajectories.

The package turns a database of 3D object trajectories into a labeled
"knowledge database" through recorded, replayable pipelines of filtering,
fuzzy c-means clustering, manual labeling, and interactive group edits,
plus per-group evaluation and comparison between results.
"""

from .benchmark import BenchmarkConfig, default_config, describe, generate
from .clustering import FcmConfig, FuzzyPartition, fcm_fit, hard_assign
from .data import (
    ObjectDatabase,
    Point3,
    Selection,
    Trajectory,
    export_table,
    ingest_table,
    validate,
)
from .evaluation import GroupStats, KdbComparison, compare_kdbs, group_stats
from .features import FeatureMatrix, FeatureSpec, build_feature_matrix
from .filters import (
    CharacteristicFilter,
    FilterSpec,
    SpatialBoxFilter,
    SpatialThresholdFilter,
    TemporalFilter,
    apply_filter,
    preview_filter,
)
from .pipeline import (
    KnowledgeDatabase,
    PipelineRecord,
    Session,
    Step,
    cluster_step,
    dissolve_step,
    exclude_step,
    filter_step,
    insert_step,
    manual_step,
    merge_step,
    open_session,
    replay,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkConfig", "default_config", "describe", "generate",
    "FcmConfig", "FuzzyPartition", "fcm_fit", "hard_assign",
    "ObjectDatabase", "Point3", "Selection", "Trajectory",
    "export_table", "ingest_table", "validate",
    "GroupStats", "KdbComparison", "compare_kdbs", "group_stats",
    "FeatureMatrix", "FeatureSpec", "build_feature_matrix",
    "CharacteristicFilter", "FilterSpec", "SpatialBoxFilter",
    "SpatialThresholdFilter", "TemporalFilter", "apply_filter",
    "preview_filter",
    "KnowledgeDatabase", "PipelineRecord", "Session", "Step",
    "cluster_step", "dissolve_step", "exclude_step", "filter_step",
    "insert_step", "manual_step", "merge_step", "open_session", "replay",
    "__version__",
]

"""The bundled four-step discovery pipeline for the default benchmark.

The steps mirror the scenario the default benchmark is built for:

1. spatial filter: keep objects whose centroid lies in the upper half
   (vertical axis y >= 0) -> group ``upper``;
2. fuzzy c-means on the start points (x, y, z), recorded as the ``side``
   tag dimension (``left``/``right``): the sides continue as one unit but
   every final group is split by side;
3. fuzzy c-means on two movement features - the angle of the net
   displacement against the horizontal plane, and the extent of the
   trajectory's rotated projection (rotation 30 degrees about y, extent
   along x in the xz-plane) - separating ``surface`` movers from ``deep``
   ones;
4. manual labeling of the ``deep`` group into ``forward`` and ``outward``
   movers; the bundled record stores the labels an analyst would have
   assigned (taken from the generator's ground truth).

Replaying the record on the default benchmark yields six leaf groups:
upper/{left,right}/surface and upper/{left,right}/deep/{forward,outward}.
"""

from __future__ import annotations

from .benchmark import BenchmarkConfig, default_config, generate
from .clustering import FcmConfig
from .features import FeatureSpec
from .filters import SpatialThresholdFilter
from .pipeline import PipelineRecord, cluster_step, filter_step, manual_step

# The rotation angle for the projection-extent feature; any moderate
# oblique angle works, 30 degrees is the documented default.
PROJECTION_ANGLE_DEG = 30.0

UPPER_THRESHOLD = 0.0

SIDE_SEED = 11
DEPTH_SEED = 13


def step1_filter():
    return filter_step(
        SpatialThresholdFilter(axis="y", comparator=">=", value=UPPER_THRESHOLD,
                               statistic="centroid"),
        output="upper",
        note="All objects of interest live in the upper half along the "
             "vertical axis: keep objects with centroid y >= 0.",
        step_id="s1",
    )


def step2_sides():
    return cluster_step(
        features=[FeatureSpec("start_point")],
        config=FcmConfig(c=2, seed=SIDE_SEED),
        outputs=["left", "right"],
        input_group="upper",
        as_tag=True,
        tag_dimension="side",
        note="Separate the two sides by clustering the start points "
             "(x, y, z); the sides continue as one unit but membership "
             "is retained for the final split.",
        step_id="s2",
    )


def step3_depth():
    return cluster_step(
        features=[
            FeatureSpec("plane_angle", normalize="zscore",
                        plane_normal=(0.0, 1.0, 0.0)),
            FeatureSpec("rotated_projection_range", normalize="zscore",
                        angle_deg=PROJECTION_ANGLE_DEG, rotation_axis="y",
                        projection_plane="xz", extent_axis="x"),
        ],
        config=FcmConfig(c=2, seed=DEPTH_SEED),
        outputs=["deep", "surface"],
        input_group="upper",
        note="Straight vertical movers near the surface vs everything "
             "else: cluster the net-displacement angle against the "
             "horizontal plane together with the rotated projection "
             "extent.",
        step_id="s3",
    )


def step4_manual(labels: dict[str, str]):
    return manual_step(
        labels=labels,
        input_group="deep",
        note="The deep movers split into rather forward and rather "
             "outward motion; too entangled for features, labeled by "
             "hand.",
        step_id="s4",
    )


def build_example_record(cfg: BenchmarkConfig | None = None) -> PipelineRecord:
    """The bundled pipeline, with manual labels stored for the given
    benchmark configuration (default configuration if omitted)."""
    cfg = cfg or default_config()
    _, truth = generate(cfg)
    labels: dict[str, str] = {}
    for oid, path in truth.assignments.items():
        if path[0] == "deep-forward":
            labels[oid] = "forward"
        elif path[0] == "deep-outward":
            labels[oid] = "outward"
    record = PipelineRecord(source_db_id="benchmark")
    record.steps = [step1_filter(), step2_sides(), step3_depth(),
                    step4_manual(labels)]
    record.validate()
    return record

"""Interactive modifications: fuse, force a further split, dissolve, exclude.

When a clustering result is not satisfactory, the grouping is edited
rather than recomputed from scratch: merge groups, re-cluster one group
with different features, dissolve a group into its remaining siblings,
or exclude groups entirely. Every edit is a recorded step; undo pops the
last one.

Run:  python demos/05_interactive_modifications.py
"""

from trajkd import (
    FcmConfig,
    FeatureSpec,
    SpatialThresholdFilter,
    cluster_step,
    default_config,
    dissolve_step,
    exclude_step,
    filter_step,
    generate,
    merge_step,
    open_session,
)

db, _ = generate(default_config(n_objects=120, n_frames=60))
session = open_session(db)


def leaves():
    return {"/".join(p): len(ids)
            for p, ids in sorted(session.finalize().leaf_groups().items())}


session.commit_step(filter_step(
    SpatialThresholdFilter(axis="y", comparator=">=", value=0.0),
    output="upper"))
session.commit_step(cluster_step(
    features=[FeatureSpec("start_point")],
    config=FcmConfig(c=4, seed=21),
    outputs=["a", "b", "c", "d"],
    input_group="upper",
    note="deliberately over-clustered into four groups"))
print("over-clustered:", leaves())

# fuse two groups that belong together
session.commit_step(merge_step(["a", "b"], "ab"))
print("after merge:   ", leaves())

# that was wrong after all
session.undo()
print("after undo:    ", leaves())

# dissolve one group instead: members spread to the nearest remaining
# sibling centers from the same clustering
session.commit_step(dissolve_step("d"))
print("after dissolve:", leaves())

# force a further clustering of one group, with different features
session.commit_step(cluster_step(
    features=[FeatureSpec("plane_angle", plane_normal=(0, 1, 0),
                          zero_fallback=True)],
    config=FcmConfig(c=2, seed=22),
    outputs=["c_flat", "c_steep"],
    input_group="c",
    kind="split_recluster"))
print("after split:   ", leaves())

# exclude a group from the analysis altogether
session.commit_step(exclude_step(["c_flat"]))
kdb = session.finalize()
print("after exclude: ", leaves())
print(f"excluded objects: {len(kdb.excluded)}")
print(f"\nevery edit is in the record: "
      f"{[s.kind for s in session.record.steps]}")

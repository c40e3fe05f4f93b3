"""Evaluate discovered groups: per-group statistics of a chosen feature.

Run:  python demos/04_group_statistics.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from trajkd import (
    FeatureSpec,
    compare_kdbs,
    default_config,
    generate,
    group_stats,
    replay,
)
from trajkd.example_pipeline import build_example_record

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

db, truth = generate(default_config())
kdb, _ = replay(build_example_record(), db)

feature = FeatureSpec("mean_curvilinear_speed")
stats = group_stats(db, kdb, feature, bins=12)

print(f"{feature.kind} per group:")
for g in stats.groups:
    if g.count == 0:
        print(f"   {g.group:35s} empty")
    else:
        print(f"   {g.group:35s} n={g.count:4d} mean={g.mean:8.4f} "
              f"std={g.std:7.4f} median={g.median:8.4f}")

named = [g for g in stats.groups if g.count and not g.group.startswith("__")]
fig, ax = plt.subplots(figsize=(9, 4.5))
ax.bar(range(len(named)), [g.mean for g in named],
       yerr=[g.std for g in named], capsize=3, color="tab:blue")
ax.set_xticks(range(len(named)))
ax.set_xticklabels([g.group.replace("upper/", "") for g in named],
                   rotation=30, ha="right", fontsize=8)
ax.set_ylabel("mean curvilinear speed (units/frame)")
ax.set_title("speed per discovered group")
fig.tight_layout()
fig.savefig(OUT / "group_speed.png", dpi=130)
print(f"\nwrote {OUT / 'group_speed.png'}")

# quantitative comparison against the generator's ground truth
comparison = compare_kdbs(truth, kdb)
print(f"\nvs ground truth: agreement {comparison.agreement:.3f}, "
      f"ARI {comparison.ari:.3f}")
for m in comparison.matches:
    print(f"   {m.group:28s} -> {m.best_match or '-':35s} "
          f"overlap {m.overlap}/{m.size}")

"""Generate the bundled benchmark and look at it from both views.

The default scenario places six target populations in the upper half of
an embryo-like shell (three per side: straight vertical movers near the
surface, deep forward movers, deep outward movers) among random-walking
distractors in the lower half. Every object carries a ground-truth label,
so any discovery pipeline run on this data can be scored exactly.

Run:  python demos/01_generate_benchmark.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from trajkd import default_config, describe, export_table, generate

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

cfg = default_config()
print(describe(cfg))

db, truth = generate(cfg)
print(f"\nframe range: {db.frame_range}, "
      f"export size ~{len(export_table(db)) / 1e6:.1f} MB")

# front view (x-y) and side view (z-y), one color per ground-truth group
colors = {
    ("surface-straight", "left"): "tab:blue",
    ("surface-straight", "right"): "tab:cyan",
    ("deep-forward", "left"): "tab:green",
    ("deep-forward", "right"): "tab:olive",
    ("deep-outward", "left"): "tab:red",
    ("deep-outward", "right"): "tab:orange",
    ("distractor",): "0.8",
}

fig, axes = plt.subplots(1, 2, figsize=(13, 6), sharey=True)
for ax, (h, title) in zip(axes, [(0, "front view (x-y)"), (2, "side view (z-y)")]):
    for oid, traj in db.trajectories.items():
        group = truth.assignments[oid]
        ax.plot(traj.positions[:, h], traj.positions[:, 1],
                color=colors[group], linewidth=0.4,
                alpha=0.5 if group == ("distractor",) else 0.9)
    ax.set_title(title)
    ax.set_ylabel("y (vertical)")
    ax.axhline(0.0, color="k", linestyle=":", linewidth=0.8)

fig.suptitle("benchmark: six labeled target populations + distractors")
fig.tight_layout()
fig.savefig(OUT / "benchmark_views.png", dpi=130)
print(f"wrote {OUT / 'benchmark_views.png'}")

import { describe, expect, it } from "vitest";

import type { GroupFeatureStats, ProjectionPayload } from "../src/api.js";
import { ColorMap, groupedCount } from "../src/state.js";
import { histogramSeries, layoutGroupBars } from "../src/statsPanel.js";
import { Draw2D, renderView } from "../src/views.js";

describe("color map", () => {
  it("keeps a group's color stable across re-renders", () => {
    const colors = new ColorMap();
    const first = colors.color("upper/left");
    colors.color("upper/right");
    colors.color("other");
    expect(colors.color("upper/left")).toBe(first);
  });

  it("does not recycle colors when unrelated groups appear", () => {
    const colors = new ColorMap();
    const a = colors.color("a");
    for (let i = 0; i < 5; i++) colors.color(`g${i}`);
    expect(colors.color("a")).toBe(a);
  });
});

class RecordingContext implements Draw2D {
  strokeStyle: string | CanvasGradient | CanvasPattern = "#000";
  lineWidth = 1;
  globalAlpha = 1;
  strokes: { style: string; points: number }[] = [];
  private current = 0;

  clearRect(): void {}
  beginPath(): void {
    this.current = 0;
  }
  moveTo(): void {
    this.current = 1;
  }
  lineTo(): void {
    this.current += 1;
  }
  stroke(): void {
    this.strokes.push({ style: String(this.strokeStyle), points: this.current });
  }
}

function projection(polylines: ProjectionPayload["polylines"]): ProjectionPayload {
  return {
    view: "front", horizontal_axis: "x", vertical_axis: "y",
    n_objects: polylines.length, polylines,
  };
}

describe("view rendering", () => {
  it("draws grouped objects in their group color and the rest grey", () => {
    const colors = new ColorMap();
    const ctx = new RecordingContext();
    const payload = projection([
      { object_id: "a", points: [[0, 0], [1, 1]], group: "upper" },
      { object_id: "b", points: [[0, 1], [1, 2]], group: null },
    ]);
    const stats = renderView(ctx, payload, {
      width: 100, height: 100, colors,
    });
    expect(stats.grouped).toBe(1);
    expect(stats.deEmphasized).toBe(1);
    const styles = ctx.strokes.map(s => s.style);
    expect(styles).toContain(colors.color("upper"));
    expect(styles).toContain("#c8c8c8");
  });

  it("overlays preview ids on top", () => {
    const colors = new ColorMap();
    const ctx = new RecordingContext();
    const payload = projection([
      { object_id: "a", points: [[0, 0], [1, 1]], group: null },
    ]);
    renderView(ctx, payload, {
      width: 100, height: 100, colors, previewIds: new Set(["a"]),
    });
    expect(ctx.strokes[ctx.strokes.length - 1].style).toBe("#111111");
  });

  it("counts grouped polylines", () => {
    expect(groupedCount([
      { object_id: "a", points: [], group: "g" },
      { object_id: "b", points: [], group: null },
    ])).toBe(1);
  });
});

describe("stats panel", () => {
  const stats = (group: string, count: number, mean: number): GroupFeatureStats => ({
    group, count, mean, std: 0, min: mean, max: mean, median: mean,
    bin_edges: [0, 1, 2], bin_counts: [count, 0],
  });

  it("lays out one bar per non-empty named group, tallest at max", () => {
    const layout = layoutGroupBars([
      stats("upper/a", 5, 2.0),
      stats("upper/b", 3, 1.0),
      stats("__unassigned__", 7, 9.0),
      stats("empty", 0, 0),
    ], 300, 200);
    expect(layout.bars.map(b => b.group)).toEqual(["upper/a", "upper/b"]);
    expect(layout.maxValue).toBe(2.0);
    expect(layout.bars[0].h).toBeGreaterThan(layout.bars[1].h);
  });

  it("reports histogram bins exactly as served", () => {
    const series = histogramSeries(stats("g", 4, 1.0));
    expect(series).toEqual([
      { x0: 0, x1: 1, count: 4 },
      { x0: 1, x1: 2, count: 0 },
    ]);
  });
});

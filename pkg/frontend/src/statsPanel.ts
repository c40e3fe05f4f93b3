// Per-group evaluation charts rendered from GroupStats payloads. The
// panel draws exactly what the server sent; bar heights and bin counts
// are never recomputed client-side.

import type { GroupFeatureStats } from "./api.js";
import { ColorMap } from "./state.js";

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
  group: string;
  value: number;
}

export interface BarChartLayout {
  bars: Rect[];
  maxValue: number;
}

/**
 * Lay out a mean-per-group bar chart in pixel space. Pseudo-groups
 * (excluded/unassigned) and empty groups are left out.
 */
export function layoutGroupBars(
  groups: GroupFeatureStats[], width: number, height: number, margin = 30,
): BarChartLayout {
  const named = groups.filter(g => g.count > 0 && !g.group.startsWith("__"));
  const maxValue = named.reduce((m, g) => Math.max(m, g.mean ?? 0), 0);
  const innerW = width - 2 * margin;
  const innerH = height - 2 * margin;
  const slot = named.length ? innerW / named.length : innerW;
  const bars: Rect[] = named.map((g, i) => {
    const h = maxValue > 0 ? ((g.mean ?? 0) / maxValue) * innerH : 0;
    return {
      x: margin + i * slot + slot * 0.15,
      y: height - margin - h,
      w: slot * 0.7,
      h,
      group: g.group,
      value: g.mean ?? 0,
    };
  });
  return { bars, maxValue };
}

export interface Fill2D {
  fillRect(x: number, y: number, w: number, h: number): void;
  fillStyle: string | CanvasGradient | CanvasPattern;
  fillText(text: string, x: number, y: number): void;
  font: string;
}

export function drawGroupBars(
  ctx: Fill2D, layout: BarChartLayout, colors: ColorMap, height: number,
): void {
  ctx.font = "10px sans-serif";
  for (const bar of layout.bars) {
    ctx.fillStyle = colors.color(bar.group);
    ctx.fillRect(bar.x, bar.y, bar.w, bar.h);
    ctx.fillStyle = "#333";
    ctx.fillText(bar.group.split("/").slice(-2).join("/"),
                 bar.x, height - 12);
    ctx.fillText(bar.value.toPrecision(3), bar.x, bar.y - 4);
  }
}

/** histogram bin counts exactly as served, for one group */
export function histogramSeries(stats: GroupFeatureStats):
    { x0: number; x1: number; count: number }[] {
  const out = [];
  for (let i = 0; i < stats.bin_counts.length; i++) {
    out.push({
      x0: stats.bin_edges[i],
      x1: stats.bin_edges[i + 1],
      count: stats.bin_counts[i],
    });
  }
  return out;
}

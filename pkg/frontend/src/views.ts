// Dual-panel trajectory rendering (front + side view). Grouped objects
// draw in their group color, everything else is de-emphasized grey;
// preview overlays highlight the would-be-selected ids.

import type { Polyline, ProjectionPayload } from "./api.js";
import { fitBounds, Mapping, toScreen } from "./geometry.js";
import { ColorMap } from "./state.js";

// the subset of CanvasRenderingContext2D the renderer needs; tests pass a
// recording stub, the browser passes the real context
export interface Draw2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
}

export interface RenderOptions {
  width: number;
  height: number;
  colors: ColorMap;
  previewIds?: Set<string> | null;
  highlightIds?: Set<string> | null;
}

export interface RenderStats {
  drawn: number;
  grouped: number;
  deEmphasized: number;
  mapping: Mapping;
}

const GREY = "#c8c8c8";
const PREVIEW = "#111111";

function drawLine(ctx: Draw2D, mapping: Mapping, line: Polyline): void {
  const pts = line.points;
  if (pts.length === 0) return;
  ctx.beginPath();
  const first = toScreen(mapping, pts[0][0], pts[0][1]);
  ctx.moveTo(first.x, first.y);
  for (let i = 1; i < pts.length; i++) {
    const p = toScreen(mapping, pts[i][0], pts[i][1]);
    ctx.lineTo(p.x, p.y);
  }
  ctx.stroke();
}

export function renderView(
  ctx: Draw2D, projection: ProjectionPayload, opts: RenderOptions,
): RenderStats {
  const mapping = fitBounds(projection.polylines, opts.width, opts.height);
  ctx.clearRect(0, 0, opts.width, opts.height);
  let grouped = 0;
  let deEmphasized = 0;

  // grey background pass first so colored groups stay visible on top
  for (const line of projection.polylines) {
    if (line.group) continue;
    ctx.strokeStyle = GREY;
    ctx.lineWidth = 0.6;
    ctx.globalAlpha = 0.6;
    drawLine(ctx, mapping, line);
    deEmphasized += 1;
  }
  for (const line of projection.polylines) {
    if (!line.group) continue;
    ctx.strokeStyle = opts.colors.color(line.group);
    ctx.lineWidth = 1.1;
    ctx.globalAlpha = 0.9;
    drawLine(ctx, mapping, line);
    grouped += 1;
  }
  if (opts.previewIds) {
    for (const line of projection.polylines) {
      if (!opts.previewIds.has(line.object_id)) continue;
      ctx.strokeStyle = PREVIEW;
      ctx.lineWidth = 1.4;
      ctx.globalAlpha = 1.0;
      drawLine(ctx, mapping, line);
    }
  }
  if (opts.highlightIds) {
    for (const line of projection.polylines) {
      if (!opts.highlightIds.has(line.object_id)) continue;
      ctx.strokeStyle = "#e8590c";
      ctx.lineWidth = 2.0;
      ctx.globalAlpha = 1.0;
      drawLine(ctx, mapping, line);
    }
  }
  ctx.globalAlpha = 1.0;
  return {
    drawn: projection.polylines.length,
    grouped,
    deEmphasized,
    mapping,
  };
}

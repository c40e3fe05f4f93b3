// Screen-space picking: nearest polyline within a pixel radius.

import type { Polyline } from "./api.js";

export interface Point {
  x: number;
  y: number;
}

/** world -> screen mapping produced by fitting data bounds to the canvas */
export interface Mapping {
  scale: number;
  offsetX: number;
  offsetY: number;
  /** canvas y grows downward; world y grows upward */
  flipY: boolean;
  height: number;
}

export function fitBounds(
  polylines: Polyline[], width: number, height: number, margin = 20,
): Mapping {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const line of polylines) {
    for (const [x, y] of line.points) {
      if (x < minX) minX = x;
      if (x > maxX) maxX = x;
      if (y < minY) minY = y;
      if (y > maxY) maxY = y;
    }
  }
  if (!isFinite(minX)) {
    return { scale: 1, offsetX: 0, offsetY: 0, flipY: true, height };
  }
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min((width - 2 * margin) / spanX,
                         (height - 2 * margin) / spanY);
  return {
    scale,
    offsetX: margin - minX * scale + (width - 2 * margin - spanX * scale) / 2,
    offsetY: margin - minY * scale + (height - 2 * margin - spanY * scale) / 2,
    flipY: true,
    height,
  };
}

export function toScreen(m: Mapping, x: number, y: number): Point {
  const sx = x * m.scale + m.offsetX;
  const sy = y * m.scale + m.offsetY;
  return { x: sx, y: m.flipY ? m.height - sy : sy };
}

/** Squared distance from a point to a line segment. */
export function segmentDistanceSq(p: Point, a: Point, b: Point): number {
  const abx = b.x - a.x;
  const aby = b.y - a.y;
  const lenSq = abx * abx + aby * aby;
  let t = 0;
  if (lenSq > 0) {
    t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / lenSq;
    t = Math.max(0, Math.min(1, t));
  }
  const dx = p.x - (a.x + t * abx);
  const dy = p.y - (a.y + t * aby);
  return dx * dx + dy * dy;
}

/**
 * The object whose polyline comes closest to the click, if within
 * `radius` pixels; ambiguous picks resolve to the nearest, no pick
 * within the radius resolves to null.
 */
export function pickTrajectory(
  polylines: Polyline[], mapping: Mapping, click: Point, radius = 6,
): string | null {
  let best: string | null = null;
  let bestSq = radius * radius;
  for (const line of polylines) {
    const pts = line.points;
    if (pts.length === 1) {
      const p = toScreen(mapping, pts[0][0], pts[0][1]);
      const dx = p.x - click.x;
      const dy = p.y - click.y;
      const dSq = dx * dx + dy * dy;
      if (dSq <= bestSq) {
        bestSq = dSq;
        best = line.object_id;
      }
      continue;
    }
    for (let i = 0; i + 1 < pts.length; i++) {
      const a = toScreen(mapping, pts[i][0], pts[i][1]);
      const b = toScreen(mapping, pts[i + 1][0], pts[i + 1][1]);
      const dSq = segmentDistanceSq(click, a, b);
      if (dSq <= bestSq) {
        bestSq = dSq;
        best = line.object_id;
      }
    }
  }
  return best;
}

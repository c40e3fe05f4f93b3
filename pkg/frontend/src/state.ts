// Workbench state: the active dataset/session, current view transforms,
// the step draft under edit, and a color map that stays stable across
// re-renders for unchanged groups.

import type { GroupingPayload, Polyline, ProjectionPayload } from "./api.js";

export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export interface WorkbenchState {
  dbId: string | null;
  sessionId: string | null;
  revision: number;
  projections: { front: ProjectionPayload | null; side: ProjectionPayload | null };
  grouping: GroupingPayload | null;
  views: { front: ViewTransform; side: ViewTransform };
  /** ids highlighted by the current preview overlay (null = no overlay) */
  previewIds: Set<string> | null;
  /** group the label mode assigns clicks to (null = label mode off) */
  labelTarget: string | null;
  /** staged label toggles, committed as one manual step */
  pendingLabels: Map<string, string>;
}

export function initialState(): WorkbenchState {
  return {
    dbId: null,
    sessionId: null,
    revision: 0,
    projections: { front: null, side: null },
    grouping: null,
    views: {
      front: { zoom: 1, panX: 0, panY: 0 },
      side: { zoom: 1, panX: 0, panY: 0 },
    },
    previewIds: null,
    labelTarget: null,
    pendingLabels: new Map(),
  };
}

const PALETTE = [
  "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7",
  "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0", "#0f52ba", "#e03131",
];

/**
 * Stable group -> color assignment: a group keeps its color for the
 * lifetime of the map, regardless of what other groups appear or
 * disappear around it.
 */
export class ColorMap {
  private assigned = new Map<string, string>();
  private next = 0;

  color(group: string): string {
    let c = this.assigned.get(group);
    if (c === undefined) {
      c = PALETTE[this.next % PALETTE.length];
      this.next += 1;
      this.assigned.set(group, c);
    }
    return c;
  }

  snapshot(): Map<string, string> {
    return new Map(this.assigned);
  }
}

/** Count of objects that currently carry a group in a projection. */
export function groupedCount(polylines: Polyline[]): number {
  return polylines.reduce((n, p) => n + (p.group ? 1 : 0), 0);
}

// Click-to-label: clicks toggle the nearest trajectory (within the pick
// radius) in and out of the target group; the staged batch commits as a
// single manual-label step so the whole interaction replays exactly.

import type { Polyline, StepDict, WorkbenchApi } from "./api.js";
import { Mapping, pickTrajectory, Point } from "./geometry.js";

export const PICK_RADIUS_PX = 6;

export class LabelMode {
  /** staged object -> group assignments (absent = not labeled) */
  readonly pending = new Map<string, string>();

  constructor(
    private api: WorkbenchApi,
    private sessionId: string,
    /** the group being subdivided */
    public inputGroup: string,
    /** the group clicks assign to */
    public targetGroup: string,
  ) {}

  /**
   * Toggle the clicked trajectory. Returns the toggled object id, or
   * null when no trajectory lies within the pick radius (a no-op).
   */
  toggle(polylines: Polyline[], mapping: Mapping, click: Point,
         radius = PICK_RADIUS_PX): string | null {
    const oid = pickTrajectory(polylines, mapping, click, radius);
    if (oid === null) return null;
    this.toggleId(oid);
    return oid;
  }

  toggleId(oid: string): void {
    if (this.pending.get(oid) === this.targetGroup) {
      this.pending.delete(oid);
    } else {
      this.pending.set(oid, this.targetGroup);
    }
  }

  labeledIds(): string[] {
    return [...this.pending.keys()].sort();
  }

  step(): StepDict {
    return {
      kind: "manual",
      input: this.inputGroup,
      labels: Object.fromEntries([...this.pending.entries()].sort()),
      default_group: null,
    };
  }

  /** commit the staged labels as one recorded step */
  async commit(): Promise<void> {
    await this.api.commitStep(this.sessionId, this.step());
    this.pending.clear();
  }
}

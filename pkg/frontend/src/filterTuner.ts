// Live filter tuning: every slider change issues a preview request and
// the displayed count always comes from the server's answer, never from
// client-side evaluation. A commit that slips in between previews makes
// the server reject the stale preview; the tuner then refetches the
// revision and retries once.

import { ApiError, StepDict, WorkbenchApi } from "./api.js";

export interface TunerConfig {
  axis: "x" | "y" | "z";
  comparator: ">=" | "<=";
  statistic: "centroid" | "start" | "end" | "all_points" | "any_point";
  outputName: string;
  input: string | null;
}

export interface TunerView {
  /** called with the server's selected/rejected counts after every preview */
  onCounts(selected: number, rejected: number): void;
  /** called with the ids to highlight in the view panels */
  onSelection(ids: Set<string> | null): void;
}

export class FilterTuner {
  value = 0;
  lastPreviewedValue: number | null = null;
  displayedCount: number | null = null;

  constructor(
    private api: WorkbenchApi,
    private sessionId: string,
    private revision: number,
    private config: TunerConfig,
    private view: TunerView,
  ) {}

  private step(value: number): StepDict {
    return {
      kind: "filter",
      input: this.config.input,
      output: this.config.outputName,
      spec: {
        kind: "spatial_threshold",
        axis: this.config.axis,
        comparator: this.config.comparator,
        value,
        statistic: this.config.statistic,
      },
    };
  }

  /** slider movement: preview the threshold and display the server count */
  async setThreshold(value: number): Promise<number> {
    this.value = value;
    try {
      return await this.previewOnce(value);
    } catch (err) {
      if (err instanceof ApiError && err.code === "stale_preview") {
        const grouping = await this.api.grouping(this.sessionId);
        this.revision = grouping.revision;
        return await this.previewOnce(value);
      }
      throw err;
    }
  }

  private async previewOnce(value: number): Promise<number> {
    const resp = await this.api.previewStep(this.sessionId, this.step(value),
                                            this.revision);
    this.revision = resp.revision;
    this.lastPreviewedValue = value;
    const selected = resp.preview.outputs[this.config.outputName] ?? 0;
    this.displayedCount = selected;
    this.view.onCounts(selected, resp.preview.input_size - selected);
    // the committed grouping will color them; until then highlight
    this.view.onSelection(null);
    return selected;
  }

  /** commit the current threshold as a recorded step */
  async commit(): Promise<number> {
    const resp = await this.api.commitStep(this.sessionId, this.step(this.value));
    this.revision = resp.revision;
    this.view.onSelection(null);
    return resp.committed.outputs[this.config.outputName] ?? 0;
  }
}

// Group-tree edits: merge, forced re-clustering, dissolve, exclude.
// Thin veneer over the service; the tree view re-renders from the
// grouping payload the commit returns.

import type { GroupingPayload, StepDict, WorkbenchApi } from "./api.js";

export interface FcmConfigDict {
  c: number;
  m?: number;
  tol?: number;
  max_iter?: number;
  seed: number;
  n_restarts?: number;
}

export class ClusterPanel {
  constructor(private api: WorkbenchApi, private sessionId: string) {}

  merge(sources: string[], output: string): Promise<GroupingPayload> {
    return this.commit({ kind: "merge", sources, output });
  }

  splitRecluster(group: string, features: Record<string, unknown>[],
                 config: FcmConfigDict, outputs: string[]):
      Promise<GroupingPayload> {
    return this.commit({
      kind: "split_recluster",
      input: group,
      features,
      config,
      outputs,
    });
  }

  dissolve(group: string): Promise<GroupingPayload> {
    return this.commit({ kind: "dissolve", group });
  }

  exclude(groups: string[]): Promise<GroupingPayload> {
    return this.commit({ kind: "exclude", groups });
  }

  cluster(input: string | null, features: Record<string, unknown>[],
          config: FcmConfigDict, outputs: string[],
          tagDimension?: string): Promise<GroupingPayload> {
    const step: StepDict = { kind: "cluster", input, features, config, outputs };
    if (tagDimension) {
      step.as_tag = true;
      step.tag_dimension = tagDimension;
    }
    return this.commit(step);
  }

  private async commit(step: StepDict): Promise<GroupingPayload> {
    return await this.api.commitStep(this.sessionId, step);
  }
}

/** total object count per leaf, for the tree view */
export function leafSizes(grouping: GroupingPayload): Map<string, number> {
  const sizes = new Map<string, number>();
  for (const g of grouping.groups) {
    if (g.is_leaf) sizes.set(g.path.join("/"), g.size);
  }
  return sizes;
}

// Typed client for the trajkd service JSON contract. The workbench is a
// pure client: every displayed grouping is derived from these payloads,
// never computed locally.

export interface DatasetInfo {
  db_id: string;
  n_objects: number;
  frame_range: [number, number];
}

export interface Polyline {
  object_id: string;
  points: [number, number][];
  group: string | null;
}

export interface ProjectionPayload {
  view: string;
  horizontal_axis: string;
  vertical_axis: string;
  n_objects: number;
  polylines: Polyline[];
}

export interface FilterSpecDict {
  kind: "spatial_threshold" | "spatial_box" | "temporal" | "characteristic";
  [key: string]: unknown;
}

export interface StepDict {
  kind: "filter" | "cluster" | "manual" | "merge" | "split_recluster" |
        "dissolve" | "exclude";
  input?: string | null;
  note?: string;
  [key: string]: unknown;
}

export interface StepResultDict {
  step_id: string;
  kind: string;
  status: string;
  input_size: number;
  outputs: Record<string, number>;
  unmatched_manual: string[];
  dropped: string[];
  reason: string;
}

export interface GroupSummary {
  name: string;
  path: string[];
  parent: string | null;
  created_by: string;
  size: number;
  is_leaf: boolean;
}

export interface GroupingPayload {
  revision: number;
  groups: GroupSummary[];
  counts: { objects: number; grouped: number; excluded: number; unassigned: number };
  steps: Record<string, unknown>[];
}

export interface KnowledgeDbDict {
  source_db_id: string;
  pipeline_hash: string;
  assignments: Record<string, string[]>;
  provenance: Record<string, string>;
  excluded: Record<string, string>;
  unassigned: string[];
}

export interface GroupFeatureStats {
  group: string;
  count: number;
  mean: number | null;
  std: number | null;
  min: number | null;
  max: number | null;
  median: number | null;
  bin_edges: number[];
  bin_counts: number[];
}

export interface ComparisonPayload {
  agreement: number;
  ari: number;
  groups_a: string[];
  groups_b: string[];
  contingency: number[][];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, method: string, path: string,
                          body?: unknown): Promise<T> {
  const resp = await fetch(base + path, {
    method,
    headers: { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const payload = await resp.json();
  if (!resp.ok) {
    const detail = (payload as { detail?: { code?: string; message?: string } }).detail;
    throw new ApiError(resp.status, detail?.code ?? "error",
                       detail?.message ?? resp.statusText);
  }
  return payload as T;
}

export class WorkbenchApi {
  constructor(public base: string) {}

  uploadDataset(csv: string, dbId?: string): Promise<DatasetInfo> {
    return request(this.base, "POST", "/datasets", { csv, db_id: dbId });
  }

  listDatasets(): Promise<{ datasets: DatasetInfo[] }> {
    return request(this.base, "GET", "/datasets");
  }

  projection(dbId: string, view: "front" | "side", maxPoints = 200,
             sessionId?: string): Promise<ProjectionPayload> {
    return request(this.base, "POST", `/datasets/${dbId}/projection`,
                   { view, max_points: maxPoints, session_id: sessionId });
  }

  createSession(dbId: string): Promise<{ session_id: string; revision: number }> {
    return request(this.base, "POST", "/sessions", { db_id: dbId });
  }

  previewStep(sessionId: string, step: StepDict, revision?: number):
      Promise<{ revision: number; preview: StepResultDict }> {
    return request(this.base, "POST", `/sessions/${sessionId}/preview`,
                   { step, revision });
  }

  commitStep(sessionId: string, step: StepDict):
      Promise<GroupingPayload & { committed: StepResultDict }> {
    return request(this.base, "POST", `/sessions/${sessionId}/steps`, { step });
  }

  undo(sessionId: string): Promise<GroupingPayload> {
    return request(this.base, "POST", `/sessions/${sessionId}/undo`);
  }

  grouping(sessionId: string): Promise<GroupingPayload> {
    return request(this.base, "GET", `/sessions/${sessionId}/grouping`);
  }

  finalize(sessionId: string):
      Promise<{ knowledge_db: KnowledgeDbDict; export_csv: string }> {
    return request(this.base, "POST", `/sessions/${sessionId}/finalize`);
  }

  exportPipeline(sessionId: string):
      Promise<{ record: Record<string, unknown>; pipeline_hash: string }> {
    return request(this.base, "GET", `/sessions/${sessionId}/pipeline`);
  }

  replay(record: Record<string, unknown>, dbId: string,
         manualPolicy: "by-id" | "pending" = "by-id"):
      Promise<{ knowledge_db: KnowledgeDbDict; export_csv: string }> {
    return request(this.base, "POST", "/replay",
                   { record, db_id: dbId, manual_policy: manualPolicy });
  }

  stats(sessionId: string, feature: Record<string, unknown>, bins = 10):
      Promise<{ stats: { groups: GroupFeatureStats[] } }> {
    return request(this.base, "POST", `/sessions/${sessionId}/stats`,
                   { feature, bins });
  }

  compare(kdbA: KnowledgeDbDict, kdbB: KnowledgeDbDict):
      Promise<{ comparison: ComparisonPayload }> {
    return request(this.base, "POST", "/compare", { kdb_a: kdbA, kdb_b: kdbB });
  }
}

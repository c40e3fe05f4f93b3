// Browser wiring: connects the panels to the DOM. Everything below is
// glue; the behavior lives in the panel modules so it can be driven
// headlessly by the tests.

import { WorkbenchApi } from "./api.js";
import { ClusterPanel } from "./clusterPanel.js";
import { FilterTuner } from "./filterTuner.js";
import { Mapping } from "./geometry.js";
import { LabelMode } from "./labelMode.js";
import { ColorMap, initialState, WorkbenchState } from "./state.js";
import { drawGroupBars, layoutGroupBars } from "./statsPanel.js";
import { renderView } from "./views.js";

const api = new WorkbenchApi("");
const state: WorkbenchState = initialState();
const colors = new ColorMap();
let labelMode: LabelMode | null = null;
const mappings: { front: Mapping | null; side: Mapping | null } =
  { front: null, side: null };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string): void {
  el<HTMLSpanElement>("status").textContent = text;
}

async function refreshProjections(): Promise<void> {
  if (!state.dbId) return;
  const sid = state.sessionId ?? undefined;
  state.projections.front = await api.projection(state.dbId, "front", 200, sid);
  state.projections.side = await api.projection(state.dbId, "side", 200, sid);
  renderAll();
}

function renderAll(): void {
  for (const view of ["front", "side"] as const) {
    const projection = state.projections[view];
    if (!projection) continue;
    const canvas = el<HTMLCanvasElement>(`${view}-canvas`);
    const ctx = canvas.getContext("2d");
    if (!ctx) continue;
    const stats = renderView(ctx, projection, {
      width: canvas.width,
      height: canvas.height,
      colors,
      previewIds: state.previewIds,
      highlightIds: labelMode ? new Set(labelMode.labeledIds()) : null,
    });
    mappings[view] = stats.mapping;
  }
}

async function refreshGrouping(): Promise<void> {
  if (!state.sessionId) return;
  state.grouping = await api.grouping(state.sessionId);
  state.revision = state.grouping.revision;
  const tree = el<HTMLUListElement>("group-tree");
  tree.innerHTML = "";
  for (const g of state.grouping.groups) {
    const item = document.createElement("li");
    const swatch = g.is_leaf
      ? `<span style="color:${colors.color(g.path.join("/"))}">&#9632;</span> `
      : "";
    item.innerHTML = `${swatch}${g.path.join("/")} (${g.size})`;
    tree.appendChild(item);
  }
  const c = state.grouping.counts;
  el<HTMLSpanElement>("counts").textContent =
    `${c.grouped} grouped / ${c.unassigned} unassigned / ${c.excluded} excluded`;
  await refreshProjections();
}

async function main(): Promise<void> {
  el<HTMLInputElement>("csv-file").addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    setStatus("uploading...");
    const info = await api.uploadDataset(await file.text());
    state.dbId = info.db_id;
    const session = await api.createSession(info.db_id);
    state.sessionId = session.session_id;
    setStatus(`${info.n_objects} objects, session ${session.session_id}`);
    await refreshGrouping();
    wireTuner();
  });

  el<HTMLButtonElement>("undo").addEventListener("click", async () => {
    if (!state.sessionId) return;
    await api.undo(state.sessionId);
    await refreshGrouping();
  });

  el<HTMLButtonElement>("export").addEventListener("click", async () => {
    if (!state.sessionId) return;
    const payload = await api.exportPipeline(state.sessionId);
    const blob = new Blob([JSON.stringify(payload.record, null, 2)],
                          { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "pipeline.json";
    a.click();
  });

  el<HTMLButtonElement>("label-start").addEventListener("click", () => {
    if (!state.sessionId) return;
    const input = el<HTMLInputElement>("label-input-group").value;
    const target = el<HTMLInputElement>("label-target-group").value;
    if (!input || !target) return;
    labelMode = new LabelMode(api, state.sessionId, input, target);
    setStatus(`labeling ${input} -> ${target}: click trajectories`);
  });

  el<HTMLButtonElement>("label-commit").addEventListener("click", async () => {
    if (!labelMode) return;
    await labelMode.commit();
    labelMode = null;
    setStatus("labels committed");
    await refreshGrouping();
  });

  for (const view of ["front", "side"] as const) {
    el<HTMLCanvasElement>(`${view}-canvas`).addEventListener("click", (ev) => {
      const projection = state.projections[view];
      const mapping = mappings[view];
      if (!labelMode || !projection || !mapping) return;
      const rect = (ev.target as HTMLCanvasElement).getBoundingClientRect();
      const picked = labelMode.toggle(projection.polylines, mapping, {
        x: ev.clientX - rect.left,
        y: ev.clientY - rect.top,
      });
      if (picked) {
        setStatus(`${labelMode.labeledIds().length} staged labels`);
        renderAll();
      }
    });
  }

  el<HTMLButtonElement>("stats-refresh").addEventListener("click", async () => {
    if (!state.sessionId) return;
    const feature = { kind: el<HTMLSelectElement>("stats-feature").value };
    const payload = await api.stats(state.sessionId, feature, 10);
    const canvas = el<HTMLCanvasElement>("stats-canvas");
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const layout = layoutGroupBars(payload.stats.groups, canvas.width,
                                   canvas.height);
    drawGroupBars(ctx, layout, colors, canvas.height);
  });
}

function wireTuner(): void {
  if (!state.sessionId) return;
  const slider = el<HTMLInputElement>("threshold");
  const tuner = new FilterTuner(api, state.sessionId, state.revision, {
    axis: "y",
    comparator: ">=",
    statistic: "centroid",
    outputName: el<HTMLInputElement>("filter-name").value || "selected",
    input: null,
  }, {
    onCounts: (selected, rejected) => {
      el<HTMLSpanElement>("preview-count").textContent =
        `${selected} selected, ${rejected} rejected`;
    },
    onSelection: () => renderAll(),
  });
  slider.addEventListener("input", () => {
    void tuner.setThreshold(Number(slider.value));
  });
  el<HTMLButtonElement>("filter-commit").addEventListener("click", async () => {
    await tuner.commit();
    await refreshGrouping();
  });
}

main().catch((err) => setStatus(String(err)));

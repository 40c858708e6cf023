/**
 * DOM glue. Pure rendering and state rules live in the view/state
 * modules; this file only wires events to API calls and re-renders.
 *
 * Append ?fixtures to the URL to browse the published demo results
 * without a running service.
 */

import { api, ApiError, type Fractions, type ModelSummary } from "./api.js";
import { fixtureFetch } from "./fixtures.js";
import { modelLabel, serviceLabel } from "./format.js";
import {
  acceptPreview,
  beginPreview,
  debounce,
  failPreview,
  fractionsFromHandles,
  initialState,
  type DashboardState,
  type HeatmapColumn,
} from "./state.js";
import {
  renderComparison,
  type ComparisonRow,
  type CvPoint,
} from "./views/comparison.js";
import { activeLevel, renderHeatmap } from "./views/heatmap.js";
import { renderPolicyTuner } from "./views/policyTuner.js";

const MAX_HEATMAP_COLUMNS = 12;

let state: DashboardState = initialState();
let committed = false;
let models: ModelSummary[] = [];

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function message(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return String(error);
}

// ---------------------------------------------------------------- tuner

const requestPreview = debounce((draft: Fractions) => {
  const { modelId, datasetId } = state;
  if (!modelId || !datasetId) return;
  const [next, tag] = beginPreview(state);
  state = next;
  api
    .previewPolicy(modelId, datasetId, draft)
    .then((metrics) => {
      state = acceptPreview(state, tag, metrics);
      renderTuner();
    })
    .catch((error) => {
      state = failPreview(state, tag, message(error));
      renderTuner();
    });
}, 250);

function onHandlesChanged(): void {
  const h1 = Number((el("handle-1") as HTMLInputElement).value) / 100;
  const h2 = Number((el("handle-2") as HTMLInputElement).value) / 100;
  state = { ...state, draft: fractionsFromHandles(h1, h2), pending: true };
  committed = false;
  requestPreview(state.draft);
}

function renderTuner(): void {
  const host = el("tuner");
  host.innerHTML = renderPolicyTuner({
    draft: state.draft,
    preview: state.preview,
    pending: state.pending,
    banner: state.banner,
    committed,
  });
  host
    .querySelectorAll("input[type=range]")
    .forEach((input) => input.addEventListener("input", onHandlesChanged));
  host.querySelector(".commit")?.addEventListener("click", () => {
    if (!state.modelId || !state.datasetId) return;
    api
      .commitPolicy(state.modelId, state.datasetId, state.draft)
      .then(() => {
        committed = true;
        renderTuner();
      })
      .catch((error) => {
        state = { ...state, banner: message(error) };
        renderTuner();
      });
  });
}

// -------------------------------------------------------------- heatmap

async function loadCohort(): Promise<void> {
  if (!state.modelId || !state.datasetId) return;
  const cohort = await api.cohort(state.modelId, state.datasetId, state.group);
  const shown = cohort.patients.slice(0, MAX_HEATMAP_COLUMNS);
  const explanations = await Promise.allSettled(
    shown.map((p) =>
      api.explanation(p.record_id, state.modelId!, state.datasetId!),
    ),
  );
  const columns: HeatmapColumn[] = shown.map((patient, i) => {
    const result = explanations[i];
    if (result.status === "fulfilled") {
      return {
        recordId: patient.record_id,
        probability: result.value.probability,
        perVariable: result.value.per_variable,
        explanation: result.value,
      };
    }
    return {
      recordId: patient.record_id,
      probability: patient.score,
      perVariable: null,
      explanation: null,
    };
  });
  state = { ...state, columns, selectedCell: null };
  renderHeatmapPanel();
}

function renderHeatmapPanel(): void {
  const host = el("heatmap");
  host.innerHTML = renderHeatmap({
    columns: state.columns,
    selected: state.selectedCell,
  });
  host.querySelectorAll("td.cell").forEach((cell) =>
    cell.addEventListener("click", () => {
      const recordId = Number(cell.getAttribute("data-record"));
      const variable = cell.getAttribute("data-variable") ?? "";
      const column = state.columns.find((c) => c.recordId === recordId);
      if (!column?.explanation) return;
      state = {
        ...state,
        selectedCell: {
          recordId,
          variable,
          value: Number(cell.getAttribute("data-value")),
          level: activeLevel(column.explanation, variable),
        },
      };
      renderHeatmapPanel();
    }),
  );
}

// ----------------------------------------------------------- comparison

async function renderComparisonPanel(): Promise<void> {
  const points: CvPoint[] = [];
  const rows: ComparisonRow[] = [];
  for (const model of models) {
    const service = serviceLabel(model.service);
    const label = modelLabel(model.kind);
    if (model.cv) {
      points.push({
        service,
        model: label,
        mean: model.cv.mean_auroc,
        std: model.cv.std_auroc,
      });
    }
    if (model.test) {
      rows.push({
        service,
        model: label,
        risk: model.test.risk,
        coverage: model.test.coverage,
      });
    }
  }
  el("comparison").innerHTML = renderComparison(points, rows);
}

// ----------------------------------------------------------------- boot

async function boot(): Promise<void> {
  if (new URLSearchParams(location.search).has("fixtures")) {
    globalThis.fetch = fixtureFetch as typeof fetch;
  }

  const datasets = await api.listDatasets();
  models = await api.listModels();
  state = {
    ...state,
    datasetId: datasets[0]?.dataset_id ?? null,
    modelId: models[0]?.model_id ?? null,
  };

  const picker = el("model-picker") as HTMLSelectElement;
  picker.innerHTML = models
    .map(
      (m) =>
        `<option value="${m.model_id}">
          ${serviceLabel(m.service)} / ${modelLabel(m.kind)} (${m.model_id})
        </option>`,
    )
    .join("");
  picker.addEventListener("change", () => {
    state = { ...state, modelId: picker.value, preview: null };
    committed = false;
    renderTuner();
    requestPreview(state.draft);
    void loadCohort();
  });

  const groupPicker = el("group-picker") as HTMLSelectElement;
  groupPicker.addEventListener("change", () => {
    state = { ...state, group: groupPicker.value as "A" | "B" | "C" };
    void loadCohort();
  });

  renderTuner();
  requestPreview(state.draft);
  requestPreview.flush();
  await renderComparisonPanel();
  await loadCohort();
}

boot().catch((error) => {
  el("tuner").innerHTML = `<div class="banner">${message(error)}</div>`;
});

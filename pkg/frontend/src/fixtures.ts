/**
 * Published clinic results wired up as an API-shaped fixture.
 *
 * The original study reports risk/coverage for a 30/40/30 split per
 * service and model family; those numbers are not reproducible from
 * synthetic data, so the dashboard renders them from this fixture in
 * demo mode and the test suite audits the rendering against them.
 */

import type {
  CohortResponse,
  DatasetSummary,
  Explanation,
  InterventionMetrics,
  ModelSummary,
} from "./api.js";

export interface PublishedCell {
  service: string; // display label
  model: string; // display label
  risk: number;
  coverage: number;
}

export const PUBLISHED_RESULTS: PublishedCell[] = [
  { service: "OH", model: "NN", risk: 0.02, coverage: 0.7 },
  { service: "OH", model: "RF", risk: 0.09, coverage: 0.55 },
  { service: "OH", model: "LR", risk: 0.17, coverage: 0.39 },
  { service: "G&D", model: "NN", risk: 0.02, coverage: 0.8 },
  { service: "G&D", model: "RF", risk: 0.03, coverage: 0.64 },
  { service: "G&D", model: "LR", risk: 0.17, coverage: 0.41 },
  { service: "YAP", model: "NN", risk: 0.03, coverage: 0.67 },
  { service: "YAP", model: "RF", risk: 0.09, coverage: 0.55 },
  { service: "YAP", model: "LR", risk: 0.2, coverage: 0.41 },
  { service: "SP", model: "NN", risk: 0.02, coverage: 0.75 },
  { service: "SP", model: "RF", risk: 0.06, coverage: 0.61 },
  { service: "SP", model: "LR", risk: 0.21, coverage: 0.4 },
];

const SERVICE_CODE: Record<string, string> = {
  OH: "OH",
  "G&D": "GD",
  YAP: "YAP",
  SP: "SP",
};
const KIND_CODE: Record<string, string> = {
  NN: "mlp",
  RF: "forest",
  LR: "linear",
};

// Display-only spread for the comparison chart; mean tracks coverage so
// better-covering models also plot higher.
function cvFor(cell: PublishedCell) {
  return {
    mean_auroc: 0.55 + cell.coverage / 4,
    std_auroc: 0.012 + cell.risk / 4,
    n_folds: 10,
    n_reps: 10,
  };
}

export const FIXTURE_DATASET: DatasetSummary = {
  dataset_id: "dfixture000001",
  n: 1500,
  no_show_rate: 0.25,
};

export function fixtureModels(): ModelSummary[] {
  return PUBLISHED_RESULTS.map((cell) => ({
    model_id: `m-${KIND_CODE[cell.model]}-${SERVICE_CODE[cell.service]}`,
    kind: KIND_CODE[cell.model],
    service: SERVICE_CODE[cell.service],
    dataset_id: FIXTURE_DATASET.dataset_id,
    cv: cvFor(cell),
    test: metricsFor(cell, [0.3, 0.4, 0.3]),
  }));
}

function cellForModel(modelId: string): PublishedCell {
  const found = PUBLISHED_RESULTS.find(
    (cell) =>
      modelId === `m-${KIND_CODE[cell.model]}-${SERVICE_CODE[cell.service]}`,
  );
  if (!found) throw new Error(`no fixture model ${modelId}`);
  return found;
}

/**
 * Published numbers hold at the 30/40/30 split; other drafts scale
 * linearly and clamp, which keeps coverage monotone in f_C and risk
 * monotone in f_A (and both zero for the degenerate (0,1,0) draft).
 */
function metricsFor(
  cell: PublishedCell,
  fractions: number[],
): InterventionMetrics {
  const n = FIXTURE_DATASET.n;
  const coverage = Math.min(1, cell.coverage * (fractions[2] / 0.3));
  const risk = Math.min(1, cell.risk * (fractions[0] / 0.3));
  const sizes = [
    Math.ceil(fractions[0] * n),
    Math.ceil((fractions[0] + fractions[1]) * n),
  ];
  return {
    auroc: cvFor(cell).mean_auroc,
    coverage,
    risk,
    n_no_show: Math.round(n * FIXTURE_DATASET.no_show_rate),
    n_test: n,
    fractions,
    thresholds: [0.31, 0.52],
    group_sizes: [sizes[0], sizes[1] - sizes[0], n - sizes[1]],
  };
}

const FIXTURE_PATIENTS: { explanation: Explanation; group: string }[] = [
  {
    group: "C",
    explanation: {
      record_id: 12,
      probability: 0.41,
      output_relevance: -0.364,
      per_column: [0.21, -0.3, 0.0, -0.18],
      absorbed: -0.094,
      column_names: [
        "age=[0,13)",
        "lead_time=[16,94)",
        "month=9",
        "day_of_week=WED",
      ],
      per_variable: { age: 0.21, lead_time: -0.3, month: 0.0, day_of_week: -0.18 },
    },
  },
  {
    group: "C",
    explanation: {
      record_id: 7,
      probability: 0.82,
      output_relevance: 1.516,
      per_column: [0.62, 0.48, 0.11, 0.0],
      absorbed: 0.306,
      column_names: [
        "age=[0,13)",
        "lead_time=[94,106)",
        "month=12",
        "day_of_week=SAT",
      ],
      per_variable: { age: 0.62, lead_time: 0.48, month: 0.11, day_of_week: 0.0 },
    },
  },
  {
    group: "C",
    explanation: {
      record_id: 31,
      probability: 0.63,
      output_relevance: 0.532,
      per_column: [-0.12, 0.55, 0.07, 0.09],
      absorbed: -0.078,
      column_names: [
        "age=[19,40)",
        "lead_time=[94,106)",
        "month=6",
        "day_of_week=MON",
      ],
      per_variable: { age: -0.12, lead_time: 0.55, month: 0.07, day_of_week: 0.09 },
    },
  },
];

function fixtureCohort(modelId: string, group: string): CohortResponse {
  const patients = FIXTURE_PATIENTS.filter((p) => p.group === group)
    .map((p) => ({
      record_id: p.explanation.record_id,
      score: p.explanation.probability,
      group,
    }))
    .sort((a, b) => b.score - a.score || a.record_id - b.record_id);
  return {
    model_id: modelId,
    dataset_id: FIXTURE_DATASET.dataset_id,
    group,
    fractions: [0.3, 0.4, 0.3],
    patients,
  };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Drop-in fetch implementation backed by the fixture data. */
export function fixtureFetch(
  input: RequestInfo | URL,
  init?: RequestInit,
): Promise<Response> {
  const url = new URL(String(input), "http://fixture");
  const path = url.pathname;
  const method = (init?.method ?? "GET").toUpperCase();

  if (path === "/datasets") return Promise.resolve(json([FIXTURE_DATASET]));
  if (path === "/models" && method === "GET")
    return Promise.resolve(json(fixtureModels()));

  const report = path.match(/^\/models\/([^/]+)\/report$/);
  if (report) {
    const model = fixtureModels().find((m) => m.model_id === report[1]);
    return Promise.resolve(
      model
        ? json(model)
        : json({ code: "UnknownIdError", message: "no such model" }, 404),
    );
  }

  if (path === "/policy/preview" && method === "POST") {
    const body = JSON.parse(String(init?.body));
    return Promise.resolve(
      json(metricsFor(cellForModel(body.model_id), body.fractions)),
    );
  }
  if (path === "/policy" && method === "PUT")
    return Promise.resolve(json(JSON.parse(String(init?.body))));

  if (path === "/cohort") {
    const modelId = url.searchParams.get("model_id") ?? "";
    const group = url.searchParams.get("group") ?? "C";
    return Promise.resolve(json(fixtureCohort(modelId, group)));
  }

  const explanation = path.match(/^\/patients\/(\d+)\/explanation$/);
  if (explanation) {
    const recordId = Number(explanation[1]);
    const patient = FIXTURE_PATIENTS.find(
      (p) => p.explanation.record_id === recordId,
    );
    return Promise.resolve(
      patient
        ? json(patient.explanation)
        : json({ code: "UnknownIdError", message: "no such record" }, 404),
    );
  }

  return Promise.resolve(
    json({ code: "usage", message: `no fixture for ${method} ${path}` }, 404),
  );
}

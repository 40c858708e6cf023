/**
 * Typed client for the scoring service. Every number shown on the
 * dashboard comes from these calls; the client only formats.
 */

declare global {
  // Optional override for static hosting next to a remote API.
  // eslint-disable-next-line no-var
  var NOSHOW_API_BASE: string | undefined;
}

export const API_BASE = globalThis.NOSHOW_API_BASE ?? "";

export type Fractions = [number, number, number];

export interface DatasetSummary {
  dataset_id: string;
  n: number;
  no_show_rate: number;
}

export interface CvSummary {
  mean_auroc: number;
  std_auroc: number;
  n_folds: number;
  n_reps: number;
}

export interface ModelSummary {
  model_id: string;
  kind: string;
  service: string;
  dataset_id?: string;
  cv?: CvSummary;
  test?: InterventionMetrics;
}

export interface InterventionMetrics {
  auroc: number;
  coverage: number;
  risk: number;
  n_no_show: number;
  n_test: number;
  fractions: number[];
  thresholds: (number | string)[];
  group_sizes: number[];
  model_id?: string;
  dataset_id?: string;
}

export interface CohortPatient {
  record_id: number;
  score: number;
  group: string;
}

export interface CohortResponse {
  model_id: string;
  dataset_id: string;
  group: string;
  fractions: number[];
  patients: CohortPatient[];
}

export interface Explanation {
  record_id: number;
  probability: number;
  output_relevance: number;
  per_column: number[];
  absorbed: number;
  column_names: string[] | null;
  per_variable: Record<string, number> | null;
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

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${API_BASE}${path}`, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!res.ok) {
    let code = "error";
    let message = `${res.status}`;
    try {
      const body = await res.json();
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body, keep the status text
    }
    throw new ApiError(res.status, code, message);
  }
  return res.json() as Promise<T>;
}

export const api = {
  listDatasets: () => request<DatasetSummary[]>("/datasets"),

  listModels: () => request<ModelSummary[]>("/models"),

  modelReport: (modelId: string) =>
    request<ModelSummary>(`/models/${modelId}/report`),

  previewPolicy: (modelId: string, datasetId: string, fractions: Fractions) =>
    request<InterventionMetrics>("/policy/preview", {
      method: "POST",
      body: JSON.stringify({
        model_id: modelId,
        dataset_id: datasetId,
        fractions,
      }),
    }),

  commitPolicy: (modelId: string, datasetId: string, fractions: Fractions) =>
    request<unknown>("/policy", {
      method: "PUT",
      body: JSON.stringify({
        model_id: modelId,
        dataset_id: datasetId,
        fractions,
      }),
    }),

  cohort: (modelId: string, datasetId: string, group: "A" | "B" | "C") =>
    request<CohortResponse>(
      `/cohort?model_id=${modelId}&dataset_id=${datasetId}&group=${group}`,
    ),

  explanation: (recordId: number, modelId: string, datasetId: string) =>
    request<Explanation>(
      `/patients/${recordId}/explanation` +
        `?model_id=${modelId}&dataset_id=${datasetId}`,
    ),
};

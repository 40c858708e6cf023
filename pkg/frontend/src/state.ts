/**
 * Dashboard state and the preview sequencing rules.
 *
 * Previews are tagged with a monotonically increasing sequence number
 * when issued; a response is displayed only if its tag is newer than
 * the tag of the metrics currently on screen, so slow responses to old
 * slider positions can never overwrite fresh ones.
 */

import type { Explanation, Fractions, InterventionMetrics } from "./api.js";

export interface HeatmapColumn {
  recordId: number;
  probability: number;
  perVariable: Record<string, number> | null;
  explanation: Explanation | null;
}

export interface CellSelection {
  recordId: number;
  variable: string;
  value: number;
  level: string;
}

export interface DashboardState {
  modelId: string | null;
  datasetId: string | null;
  draft: Fractions;
  preview: InterventionMetrics | null;
  previewSeq: number; // last issued tag
  previewShown: number; // tag of the metrics on display
  pending: boolean;
  group: "A" | "B" | "C";
  columns: HeatmapColumn[];
  selectedCell: CellSelection | null;
  banner: string | null;
}

export function initialState(): DashboardState {
  return {
    modelId: null,
    datasetId: null,
    draft: [0.3, 0.4, 0.3],
    preview: null,
    previewSeq: 0,
    previewShown: 0,
    pending: false,
    group: "C",
    columns: [],
    selectedCell: null,
    banner: null,
  };
}

function clamp01(x: number): number {
  return Math.min(1, Math.max(0, x));
}

/**
 * Two slider handles at positions p1 <= p2 split [0, 1] into the three
 * group fractions. Always non-negative, always summing to 1.
 */
export function fractionsFromHandles(p1: number, p2: number): Fractions {
  const lo = clamp01(Math.min(p1, p2));
  const hi = clamp01(Math.max(p1, p2));
  return [lo, hi - lo, 1 - hi];
}

export function handlesFromFractions(f: Fractions): [number, number] {
  return [f[0], f[0] + f[1]];
}

/** Issue the next preview tag. */
export function beginPreview(state: DashboardState): [DashboardState, number] {
  const tag = state.previewSeq + 1;
  return [{ ...state, previewSeq: tag, pending: true }, tag];
}

/** Accept a preview response unless something newer is already shown. */
export function acceptPreview(
  state: DashboardState,
  tag: number,
  metrics: InterventionMetrics,
): DashboardState {
  if (tag <= state.previewShown) return state;
  return {
    ...state,
    preview: metrics,
    previewShown: tag,
    pending: tag < state.previewSeq,
    banner: null,
  };
}

/** A failed preview clears the spinner but keeps the last good metrics. */
export function failPreview(
  state: DashboardState,
  tag: number,
  message: string,
): DashboardState {
  if (tag <= state.previewShown) return state;
  return { ...state, pending: tag < state.previewSeq, banner: message };
}

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  flush(): void;
  cancel(): void;
}

/**
 * Trailing-edge debounce. Only the final call within a burst runs, so
 * a dragged slider settles on the metrics for its final position.
 */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let lastArgs: A | null = null;

  const run = () => {
    timer = null;
    if (lastArgs) fn(...lastArgs);
  };

  const wrapped = ((...args: A) => {
    lastArgs = args;
    if (timer) clearTimeout(timer);
    timer = setTimeout(run, waitMs);
  }) as Debounced<A>;

  wrapped.flush = () => {
    if (timer) {
      clearTimeout(timer);
      run();
    }
  };
  wrapped.cancel = () => {
    if (timer) clearTimeout(timer);
    timer = null;
    lastArgs = null;
  };
  return wrapped;
}

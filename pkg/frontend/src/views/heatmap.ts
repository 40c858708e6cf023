/**
 * Cohort heatmap: one column per patient ordered by descending no-show
 * probability, one row per variable, cells shaded on the diverging
 * scale. Clicking a cell reveals the exact relevance and the level the
 * patient holds for that variable.
 */

import type { Explanation } from "../api.js";
import { NEUTRAL, relevanceColor } from "../colors.js";
import { escapeHtml, signed } from "../format.js";
import type { CellSelection, HeatmapColumn } from "../state.js";

export interface HeatmapProps {
  columns: HeatmapColumn[];
  selected: CellSelection | null;
}

/** Columns ranked by descending probability, ties by record id. */
export function orderColumns(columns: HeatmapColumn[]): HeatmapColumn[] {
  return [...columns].sort(
    (a, b) => b.probability - a.probability || a.recordId - b.recordId,
  );
}

/**
 * The level a patient holds for a variable, read off the explanation's
 * one-hot columns: the variable's column with the largest |relevance|
 * is the active one. All-zero columns mean the reference level.
 */
export function activeLevel(explanation: Explanation, variable: string): string {
  const names = explanation.column_names ?? [];
  let best = "";
  let bestAbs = 0;
  names.forEach((name, i) => {
    const [prefix, level] = name.split("=", 2);
    if (prefix !== variable || level === undefined) return;
    const magnitude = Math.abs(explanation.per_column[i] ?? 0);
    if (magnitude > bestAbs) {
      bestAbs = magnitude;
      best = level;
    }
  });
  return best || "(reference)";
}

function variableList(columns: HeatmapColumn[]): string[] {
  for (const column of columns) {
    if (column.perVariable) return Object.keys(column.perVariable);
  }
  return [];
}

function cohortMax(columns: HeatmapColumn[]): number {
  let max = 0;
  for (const column of columns) {
    for (const value of Object.values(column.perVariable ?? {})) {
      max = Math.max(max, Math.abs(value));
    }
  }
  return max;
}

function cell(
  column: HeatmapColumn,
  variable: string,
  max: number,
  selected: CellSelection | null,
): string {
  if (!column.perVariable) {
    return `<td class="placeholder" data-record="${column.recordId}">?</td>`;
  }
  const value = column.perVariable[variable] ?? 0;
  const picked =
    selected &&
    selected.recordId === column.recordId &&
    selected.variable === variable;
  const tone = value === 0 ? NEUTRAL : relevanceColor(value, max);
  return (
    `<td data-record="${column.recordId}"` +
    ` data-variable="${escapeHtml(variable)}" data-value="${value}"` +
    ` class="cell${picked ? " selected" : ""}"` +
    ` style="background:${tone}"></td>`
  );
}

function detail(selected: CellSelection | null): string {
  if (!selected) {
    return `<p class="cell-detail empty">Click a cell for the exact relevance.</p>`;
  }
  return `
    <p class="cell-detail">
      record <b>${selected.recordId}</b>,
      ${escapeHtml(selected.variable)} = ${escapeHtml(selected.level)}:
      relevance <b data-exact="${selected.value}">${signed(selected.value)}</b>
    </p>`;
}

export function renderHeatmap(props: HeatmapProps): string {
  const ordered = orderColumns(props.columns);
  if (ordered.length === 0) {
    return `<section class="panel heatmap"><h2>Why these patients</h2>
      <p class="empty">No cohort loaded.</p></section>`;
  }
  const variables = variableList(ordered);
  const max = cohortMax(ordered);
  const header = ordered
    .map(
      (c) =>
        `<th class="prob" data-record="${c.recordId}"
          title="record ${c.recordId}">${c.probability}</th>`,
    )
    .join("");
  const rows = variables
    .map(
      (variable) =>
        `<tr><th class="variable">${escapeHtml(variable)}</th>` +
        ordered.map((c) => cell(c, variable, max, props.selected)).join("") +
        `</tr>`,
    )
    .join("");
  return `
  <section class="panel heatmap">
    <h2>Why these patients</h2>
    <table>
      <thead><tr><th></th>${header}</tr></thead>
      <tbody>${rows}</tbody>
    </table>
    ${detail(props.selected)}
  </section>`;
}

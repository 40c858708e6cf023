/**
 * Model comparison panel: per-service mean CV AUROC with std whiskers,
 * plus the risk/coverage table for a 30/40/30 policy.
 */

import { escapeHtml, percent } from "../format.js";

export interface CvPoint {
  service: string;
  model: string;
  mean: number;
  std: number;
}

export interface ComparisonRow {
  service: string;
  model: string;
  risk: number;
  coverage: number;
}

export const CHART = {
  width: 560,
  height: 200,
  padX: 40,
  padY: 20,
  yMin: 0.5,
  yMax: 1.0,
};

/** Vertical pixel for an AUROC value (clamped to the axis range). */
export function yFor(value: number): number {
  const clamped = Math.min(CHART.yMax, Math.max(CHART.yMin, value));
  const inner = CHART.height - 2 * CHART.padY;
  const t = (clamped - CHART.yMin) / (CHART.yMax - CHART.yMin);
  return CHART.padY + (1 - t) * inner;
}

function whisker(point: CvPoint, x: number): string {
  const top = yFor(point.mean + point.std);
  const bottom = yFor(point.mean - point.std);
  const y = yFor(point.mean);
  return `
    <g class="point" data-service="${escapeHtml(point.service)}"
       data-model="${escapeHtml(point.model)}" data-mean="${point.mean}"
       data-std="${point.std}">
      <line class="whisker" x1="${x}" y1="${top}" x2="${x}" y2="${bottom}"></line>
      <line class="cap" x1="${x - 4}" y1="${top}" x2="${x + 4}" y2="${top}"></line>
      <line class="cap" x1="${x - 4}" y1="${bottom}" x2="${x + 4}" y2="${bottom}"></line>
      <circle cx="${x}" cy="${y}" r="3"></circle>
      <text x="${x}" y="${CHART.height - 4}" text-anchor="middle">
        ${escapeHtml(point.service)}/${escapeHtml(point.model)}</text>
    </g>`;
}

function chart(points: CvPoint[]): string {
  const step =
    (CHART.width - 2 * CHART.padX) / Math.max(1, points.length - 1 || 1);
  const marks = points
    .map((p, i) =>
      whisker(p, points.length === 1 ? CHART.width / 2 : CHART.padX + i * step),
    )
    .join("");
  const gridlines = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    .map(
      (v) => `<line class="grid" x1="${CHART.padX}" y1="${yFor(v)}"
        x2="${CHART.width - CHART.padX}" y2="${yFor(v)}"></line>
        <text class="tick" x="4" y="${yFor(v) + 3}">${v.toFixed(1)}</text>`,
    )
    .join("");
  return `<svg class="cv-chart" viewBox="0 0 ${CHART.width} ${CHART.height}"
    role="img" aria-label="mean cross-validated AUROC per model">
    ${gridlines}${marks}</svg>`;
}

function tableRows(rows: ComparisonRow[]): string {
  return rows
    .map(
      (row) => `<tr>
        <td>${escapeHtml(row.service)}</td>
        <td>${escapeHtml(row.model)}</td>
        <td>${percent(row.risk)}</td>
        <td>${percent(row.coverage)}</td>
      </tr>`,
    )
    .join("");
}

export function renderComparison(
  points: CvPoint[],
  rows: ComparisonRow[],
): string {
  if (points.length === 0) {
    return `<section class="panel comparison"><h2>Model comparison</h2>
      <p class="empty">No trained models yet.</p></section>`;
  }
  return `
  <section class="panel comparison">
    <h2>Model comparison</h2>
    ${chart(points)}
    <table class="risk-coverage">
      <thead>
        <tr><th>Service</th><th>Model</th><th>Risk</th><th>Coverage</th></tr>
      </thead>
      <tbody>${tableRows(rows)}</tbody>
    </table>
  </section>`;
}

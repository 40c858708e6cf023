/**
 * Policy tuner panel: a three-segment slider over the group fractions,
 * coverage/risk gauges fed by stateless previews, and the one mutating
 * action of the dashboard, committing the draft policy.
 */

import type { Fractions, InterventionMetrics } from "../api.js";
import { percent, escapeHtml } from "../format.js";
import { handlesFromFractions } from "../state.js";

export interface TunerProps {
  draft: Fractions;
  preview: InterventionMetrics | null;
  pending: boolean;
  banner: string | null;
  committed: boolean;
}

const GAUGE_CIRCUMFERENCE = 260;

function gauge(name: string, label: string, value: number | null): string {
  const shown = value === null ? "--" : percent(value);
  const arc = value === null ? 0 : Math.min(1, Math.max(0, value));
  return `
    <div class="gauge gauge-${name}" data-value="${shown}">
      <svg viewBox="0 0 100 100" role="img" aria-label="${label} ${shown}">
        <circle class="gauge-track" cx="50" cy="50" r="41.4"></circle>
        <circle class="gauge-fill" cx="50" cy="50" r="41.4"
          stroke-dasharray="${arc * GAUGE_CIRCUMFERENCE} ${GAUGE_CIRCUMFERENCE}"></circle>
      </svg>
      <b class="gauge-value">${shown}</b>
      <span class="gauge-label">${label}</span>
    </div>`;
}

function segmentBar(draft: Fractions): string {
  const widths = draft.map((f) => `${(f * 100).toFixed(1)}%`);
  const titles = ["A: no intervention", "B: reminder", "C: intensive"];
  return `
    <div class="segments">
      ${draft
        .map(
          (f, i) =>
            `<div class="segment segment-${"abc"[i]}" style="width:${widths[i]}"
              title="${titles[i]}">${"ABC"[i]} ${percent(f)}</div>`,
        )
        .join("")}
    </div>`;
}

export function renderPolicyTuner(props: TunerProps): string {
  const { draft, preview } = props;
  const [h1, h2] = handlesFromFractions(draft);
  const sizes = preview?.group_sizes ?? null;
  return `
  <section class="panel policy-tuner${props.pending ? " pending" : ""}">
    <h2>Intervention groups</h2>
    ${segmentBar(draft)}
    <div class="handles">
      <input type="range" id="handle-1" min="0" max="100" step="1"
        value="${Math.round(h1 * 100)}" aria-label="A/B boundary">
      <input type="range" id="handle-2" min="0" max="100" step="1"
        value="${Math.round(h2 * 100)}" aria-label="B/C boundary">
    </div>
    <div class="gauges">
      ${gauge("coverage", "coverage", preview ? preview.coverage : null)}
      ${gauge("risk", "risk", preview ? preview.risk : null)}
    </div>
    <ul class="group-sizes">
      ${["A", "B", "C"]
        .map(
          (g, i) =>
            `<li data-group="${g}">${g}: ${sizes ? sizes[i] : "--"}</li>`,
        )
        .join("")}
    </ul>
    <button class="commit" ${preview ? "" : "disabled"}>Commit policy</button>
    ${props.committed ? `<span class="committed">policy committed</span>` : ""}
    ${props.banner ? `<div class="banner">${escapeHtml(props.banner)}</div>` : ""}
  </section>`;
}

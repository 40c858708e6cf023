/**
 * Diverging relevance scale: blue for positive relevance (pushes the
 * prediction toward no-show), red for negative, neutral at zero.
 * Shade strength is |value| normalized by the cohort's largest |value|,
 * so one scale covers the whole heatmap.
 */

const POSITIVE = [26, 95, 180]; // blue
const NEGATIVE = [192, 28, 40]; // red
export const NEUTRAL = "#f2f0ef";

function mixWithWhite(channel: number, t: number): number {
  return Math.round(255 + (channel - 255) * t);
}

function hex(rgb: number[]): string {
  return `#${rgb.map((c) => c.toString(16).padStart(2, "0")).join("")}`;
}

export function relevanceColor(value: number, cohortMax: number): string {
  if (value === 0 || cohortMax <= 0) return NEUTRAL;
  const t = Math.min(1, Math.abs(value) / cohortMax);
  const base = value > 0 ? POSITIVE : NEGATIVE;
  return hex(base.map((c) => mixWithWhite(c, t)));
}

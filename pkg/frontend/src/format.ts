/** Display formatting. The only arithmetic the client performs. */

export function percent(value: number): string {
  return `${Math.round(value * 100)}%`;
}

export function signed(value: number, digits = 4): string {
  const text = value.toFixed(digits);
  return value >= 0 ? `+${text}` : text;
}

/** Model kind codes as they appear in reports, mapped to chart labels. */
export const MODEL_LABEL: Record<string, string> = {
  linear: "LR",
  forest: "RF",
  mlp: "NN",
  mlp_embedding: "NN",
};

/** Service codes rendered the way the clinic reports them. */
export const SERVICE_LABEL: Record<string, string> = {
  OH: "OH",
  GD: "G&D",
  YAP: "YAP",
  SP: "SP",
};

export function modelLabel(kind: string): string {
  return MODEL_LABEL[kind] ?? kind;
}

export function serviceLabel(code: string): string {
  return SERVICE_LABEL[code] ?? code;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

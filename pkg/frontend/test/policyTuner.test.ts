import { afterEach, describe, expect, it, vi } from "vitest";

import { api, type Fractions, type InterventionMetrics } from "../src/api.js";
import { fixtureFetch } from "../src/fixtures.js";
import { acceptPreview, beginPreview, initialState } from "../src/state.js";
import { renderPolicyTuner } from "../src/views/policyTuner.js";
import { gaugeValue } from "./helpers.js";

function renderAfterPreview(metrics: InterventionMetrics, draft: Fractions) {
  let state = { ...initialState(), draft };
  const [tagged, tag] = beginPreview(state);
  state = acceptPreview(tagged, tag, metrics);
  return renderPolicyTuner({
    draft: state.draft,
    preview: state.preview,
    pending: state.pending,
    banner: state.banner,
    committed: false,
  });
}

describe("policy tuner", () => {
  afterEach(() => vi.unstubAllGlobals());

  it("shows the published NN/OH result at the 30/40/30 split", async () => {
    vi.stubGlobal("fetch", fixtureFetch);
    const metrics = await api.previewPolicy("m-mlp-OH", "dfixture000001", [
      0.3, 0.4, 0.3,
    ]);
    const html = renderAfterPreview(metrics, [0.3, 0.4, 0.3]);
    expect(gaugeValue(html, "risk")).toBe("2%");
    expect(gaugeValue(html, "coverage")).toBe("70%");
  });

  it("renders both gauges at zero for the everything-in-B draft", async () => {
    vi.stubGlobal("fetch", fixtureFetch);
    const metrics = await api.previewPolicy(
      "m-mlp-OH",
      "dfixture000001",
      [0, 1, 0],
    );
    const html = renderAfterPreview(metrics, [0, 1, 0]);
    expect(gaugeValue(html, "risk")).toBe("0%");
    expect(gaugeValue(html, "coverage")).toBe("0%");
  });

  it("never lowers displayed coverage while f_C grows", async () => {
    vi.stubGlobal("fetch", fixtureFetch);
    let previous = -1;
    for (const fC of [0.1, 0.2, 0.3, 0.4, 0.5]) {
      const draft: Fractions = [0.3, 0.7 - fC, fC];
      const metrics = await api.previewPolicy(
        "m-mlp-OH",
        "dfixture000001",
        draft,
      );
      const html = renderAfterPreview(metrics, draft);
      const shown = Number(gaugeValue(html, "coverage").replace("%", ""));
      expect(shown).toBeGreaterThanOrEqual(previous);
      previous = shown;
    }
  });

  it("shows placeholders and a disabled commit before any preview", () => {
    const html = renderPolicyTuner({
      draft: [0.3, 0.4, 0.3],
      preview: null,
      pending: true,
      banner: null,
      committed: false,
    });
    expect(gaugeValue(html, "risk")).toBe("--");
    expect(gaugeValue(html, "coverage")).toBe("--");
    expect(html).toContain("<button class=\"commit\" disabled>");
  });

  it("lists the group sizes the preview reported", async () => {
    vi.stubGlobal("fetch", fixtureFetch);
    const metrics = await api.previewPolicy("m-mlp-OH", "dfixture000001", [
      0.3, 0.4, 0.3,
    ]);
    const html = renderAfterPreview(metrics, [0.3, 0.4, 0.3]);
    for (const [i, group] of ["A", "B", "C"].entries()) {
      expect(html).toContain(
        `<li data-group="${group}">${group}: ${metrics.group_sizes[i]}</li>`,
      );
    }
  });

  it("escapes error banners", () => {
    const html = renderPolicyTuner({
      draft: [0.3, 0.4, 0.3],
      preview: null,
      pending: false,
      banner: "<script>boom</script>",
      committed: false,
    });
    expect(html).toContain("&lt;script&gt;boom&lt;/script&gt;");
    expect(html).not.toContain("<script>boom");
  });
});

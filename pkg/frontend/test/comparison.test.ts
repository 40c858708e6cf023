import { describe, expect, it } from "vitest";

import { PUBLISHED_RESULTS } from "../src/fixtures.js";
import { percent } from "../src/format.js";
import {
  CHART,
  renderComparison,
  yFor,
  type ComparisonRow,
  type CvPoint,
} from "../src/views/comparison.js";
import { attrOf, tableRows } from "./helpers.js";

const PUBLISHED_ROWS: ComparisonRow[] = PUBLISHED_RESULTS.map((cell) => ({
  service: cell.service,
  model: cell.model,
  risk: cell.risk,
  coverage: cell.coverage,
}));

const A_POINT: CvPoint = { service: "OH", model: "NN", mean: 0.7, std: 0.03 };

describe("model comparison", () => {
  it("renders every published risk/coverage cell verbatim", () => {
    const html = renderComparison([A_POINT], PUBLISHED_ROWS);
    const rendered = tableRows(html).map((cells) => cells.join(" | "));
    const expected = [
      "OH | NN | 2% | 70%",
      "OH | RF | 9% | 55%",
      "OH | LR | 17% | 39%",
      "G&D | NN | 2% | 80%",
      "G&D | RF | 3% | 64%",
      "G&D | LR | 17% | 41%",
      "YAP | NN | 3% | 67%",
      "YAP | RF | 9% | 55%",
      "YAP | LR | 20% | 41%",
      "SP | NN | 2% | 75%",
      "SP | RF | 6% | 61%",
      "SP | LR | 21% | 40%",
    ];
    expect(rendered).toEqual(expected);
    expect(rendered).toContain("SP | NN | 2% | 75%");
  });

  it("row text comes straight from the API values", () => {
    for (const cell of PUBLISHED_RESULTS) {
      const html = renderComparison([A_POINT], [cell]);
      const [row] = tableRows(html);
      expect(row).toEqual([
        cell.service,
        cell.model,
        percent(cell.risk),
        percent(cell.coverage),
      ]);
    }
  });

  it("draws a single model as one point with whiskers", () => {
    const html = renderComparison([A_POINT], []);
    expect([...html.matchAll(/class="point"/g)]).toHaveLength(1);
    expect(html).toContain('class="whisker"');
  });

  it("whisker half-length equals the reported std exactly", () => {
    const html = renderComparison([A_POINT], []);
    const y1 = Number(attrOf(html, 'class="whisker"', "y1"));
    const y2 = Number(attrOf(html, 'class="whisker"', "y2"));
    const innerHeight = CHART.height - 2 * CHART.padY;
    const pxPerUnit = innerHeight / (CHART.yMax - CHART.yMin);
    expect(Math.abs(y2 - y1)).toBeCloseTo(2 * A_POINT.std * pxPerUnit, 9);
    expect(yFor(A_POINT.mean)).toBeCloseTo((y1 + y2) / 2, 9);
  });

  it("keeps the mean marker centred between the caps", () => {
    const html = renderComparison(
      [{ service: "SP", model: "RF", mean: 0.66, std: 0.012 }],
      [],
    );
    const cy = Number(attrOf(html, "<circle", "cy"));
    expect(cy).toBeCloseTo(yFor(0.66), 12);
  });

  it("says so when no models exist", () => {
    expect(renderComparison([], [])).toContain("No trained models yet");
  });
});

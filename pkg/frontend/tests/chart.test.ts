import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, describe, expect, it } from "vitest";

import { buildCurveChart, buildHTraceChart } from "../src/chart";

const FIXTURES = path.join(__dirname, "fixtures");
const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "plot-kit-chart-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function write(name: string, text: string): string {
  const p = path.join(tmp, name);
  fs.writeFileSync(p, text);
  return p;
}

describe("buildCurveChart", () => {
  const base = {
    xColumn: "episode",
    yColumn: "lower_return",
    phase: "",
    smoothingWindow: 1,
    title: "t",
    xLabel: "x",
    yLabel: "y",
  };

  it("single-row input yields one point and a zero-width band", () => {
    const p = write("one.csv", "episode,lower_return\n0,-5.0\n");
    const chart = buildCurveChart({ ...base, groups: [{ label: "g", inputs: [p] }] });
    expect(chart.series).toHaveLength(1);
    expect(chart.series[0].points).toEqual([{ x: 0, y: -5 }]);
    expect(chart.ribbons[0].lower).toEqual([-5]);
    expect(chart.ribbons[0].upper).toEqual([-5]);
  });

  it("two identical inputs produce a band coincident with the mean", () => {
    const text = "episode,lower_return\n0,-4\n1,-2\n2,-1\n";
    const a = write("same_a.csv", text);
    const b = write("same_b.csv", text);
    const chart = buildCurveChart({
      ...base,
      groups: [{ label: "g", inputs: [a, b] }],
    });
    const ys = chart.series[0].points.map((pt) => pt.y);
    expect(ys).toEqual([-4, -2, -1]);
    expect(chart.ribbons[0].lower).toEqual(ys);
    expect(chart.ribbons[0].upper).toEqual(ys);
  });

  it("band half-width equals the population std across inputs", () => {
    const a = write("band_a.csv", "episode,lower_return\n0,0\n1,2\n");
    const b = write("band_b.csv", "episode,lower_return\n0,4\n1,2\n");
    const chart = buildCurveChart({
      ...base,
      groups: [{ label: "g", inputs: [a, b] }],
    });
    expect(chart.series[0].points.map((pt) => pt.y)).toEqual([2, 2]);
    expect(chart.ribbons[0].lower).toEqual([0, 2]);
    expect(chart.ribbons[0].upper).toEqual([4, 2]);
  });

  it("filters by phase", () => {
    const chart = buildCurveChart({
      ...base,
      phase: "cross_train",
      groups: [{ label: "g", inputs: [path.join(FIXTURES, "run_a.csv")] }],
    });
    expect(chart.series[0].points).toHaveLength(5);
    expect(chart.series[0].points[0].y).toBeCloseTo(-60.1, 12);
  });

  it("rejects inputs that disagree on the x grid", () => {
    const a = write("grid_a.csv", "episode,lower_return\n0,1\n1,1\n");
    const b = write("grid_b.csv", "episode,lower_return\n0,1\n2,1\n");
    expect(() =>
      buildCurveChart({ ...base, groups: [{ label: "g", inputs: [a, b] }] }),
    ).toThrow(/disagree on the episode grid/);
  });

  it("assigns distinct palette colors per group", () => {
    const a = write("pal_a.csv", "episode,lower_return\n0,1\n");
    const b = write("pal_b.csv", "episode,lower_return\n0,2\n");
    const chart = buildCurveChart({
      ...base,
      groups: [
        { label: "a", inputs: [a] },
        { label: "b", inputs: [b] },
      ],
    });
    expect(chart.series[0].color).not.toBe(chart.series[1].color);
  });
});

describe("buildHTraceChart", () => {
  it("draws one series per selected episode", () => {
    const chart = buildHTraceChart({
      input: path.join(FIXTURES, "h_trace.csv"),
      episodes: [0, 5],
      title: "t",
    });
    expect(chart.series.map((s) => s.label)).toEqual(["episode 0", "episode 5"]);
    expect(chart.series[0].points.map((p) => p.y)).toEqual([15, 15, 16, 16]);
  });

  it("empty selection takes every episode in the file", () => {
    const chart = buildHTraceChart({
      input: path.join(FIXTURES, "h_trace.csv"),
      episodes: [],
      title: "t",
    });
    expect(chart.series.map((s) => s.label)).toEqual([
      "episode 0",
      "episode 2",
      "episode 5",
    ]);
  });

  it("a fixed-interval trace is a horizontal line", () => {
    const chart = buildHTraceChart({
      input: path.join(FIXTURES, "fixed_h_trace.csv"),
      episodes: [],
      title: "t",
    });
    expect(chart.series).toHaveLength(1);
    const ys = new Set(chart.series[0].points.map((p) => p.y));
    expect(ys).toEqual(new Set([16]));
  });

  it("rejects selections matching no rows", () => {
    expect(() =>
      buildHTraceChart({
        input: path.join(FIXTURES, "h_trace.csv"),
        episodes: [99],
        title: "t",
      }),
    ).toThrow(/no rows match/);
  });
});

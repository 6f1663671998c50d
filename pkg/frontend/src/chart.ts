/** Renderer-independent chart model and the two figure builders. */
import * as path from "node:path";

import { readCsv, requireColumns, Table } from "./csv";
import { Band, meanStd, smooth } from "./stats";

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  color: string;
  points: Point[];
}

/** Shaded region between lower and upper, sharing the x grid. */
export interface Ribbon {
  color: string;
  x: number[];
  lower: number[];
  upper: number[];
}

export interface Chart {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  ribbons: Ribbon[];
}

export const PALETTE = [
  "#1f6fb4",
  "#d95f02",
  "#2a9d5c",
  "#b03a72",
  "#6a51a3",
  "#8c6d31",
];

export interface CurveSpec {
  /** One entry per group; each group is averaged into one curve + band. */
  groups: { label: string; inputs: string[] }[];
  xColumn: string;
  yColumn: string;
  /** Optional filter on a "phase" column (ignored when empty). */
  phase: string;
  smoothingWindow: number;
  title: string;
  xLabel: string;
  yLabel: string;
}

function seriesFromTable(
  table: Table,
  spec: CurveSpec,
): { x: number[]; y: number[] } {
  const needed = [spec.xColumn, spec.yColumn];
  if (spec.phase !== "") {
    needed.push("phase");
  }
  requireColumns(table, needed);
  const xi = table.columns.indexOf(spec.xColumn);
  const yi = table.columns.indexOf(spec.yColumn);
  const pi = spec.phase === "" ? -1 : table.columns.indexOf("phase");
  const x: number[] = [];
  const y: number[] = [];
  for (const row of table.rows) {
    if (pi >= 0 && row[pi] !== spec.phase) {
      continue;
    }
    const xv = Number(row[xi]);
    const yv = Number(row[yi]);
    if (!Number.isFinite(xv) || !Number.isFinite(yv)) {
      throw new Error(
        `${table.path}: non-numeric value in ${spec.xColumn}/${spec.yColumn}`,
      );
    }
    x.push(xv);
    y.push(yv);
  }
  if (x.length === 0) {
    throw new Error(
      `${table.path}: no rows left` +
        (spec.phase === "" ? "" : ` for phase "${spec.phase}"`),
    );
  }
  return { x, y };
}

/** Learning curves: per group, pointwise mean across its input CSVs with a
 * population-standard-deviation band, smoothed by a centered moving
 * average. */
export function buildCurveChart(spec: CurveSpec): Chart {
  const series: Series[] = [];
  const ribbons: Ribbon[] = [];
  spec.groups.forEach((group, g) => {
    const members = group.inputs.map((p) => seriesFromTable(readCsv(p), spec));
    const x = members[0].x;
    for (const m of members) {
      if (m.x.length !== x.length || m.x.some((v, i) => v !== x[i])) {
        throw new Error(
          `group "${group.label}": input CSVs disagree on the ${spec.xColumn} grid`,
        );
      }
    }
    const band: Band = meanStd(members.map((m) => m.y));
    const mean = smooth(band.mean, spec.smoothingWindow);
    const std = smooth(band.std, spec.smoothingWindow);
    const color = PALETTE[g % PALETTE.length];
    ribbons.push({
      color,
      x,
      lower: mean.map((v, i) => v - std[i]),
      upper: mean.map((v, i) => v + std[i]),
    });
    series.push({
      label: group.label,
      color,
      points: x.map((xv, i) => ({ x: xv, y: mean[i] })),
    });
  });
  return {
    title: spec.title,
    xLabel: spec.xLabel,
    yLabel: spec.yLabel,
    series,
    ribbons,
  };
}

export interface HTraceSpec {
  input: string;
  /** Episodes to draw; empty selects every episode in the file. */
  episodes: number[];
  title: string;
}

/** Interaction-interval trace: one step-vs-H line per selected episode. */
export function buildHTraceChart(spec: HTraceSpec): Chart {
  const table = readCsv(spec.input);
  requireColumns(table, ["episode", "t", "h"]);
  const ei = table.columns.indexOf("episode");
  const ti = table.columns.indexOf("t");
  const hi = table.columns.indexOf("h");
  const byEpisode = new Map<number, Point[]>();
  for (const row of table.rows) {
    const e = Number(row[ei]);
    const t = Number(row[ti]);
    const h = Number(row[hi]);
    if (!Number.isFinite(e) || !Number.isFinite(t) || !Number.isFinite(h)) {
      throw new Error(`${table.path}: non-numeric episode/t/h row`);
    }
    if (spec.episodes.length > 0 && !spec.episodes.includes(e)) {
      continue;
    }
    if (!byEpisode.has(e)) {
      byEpisode.set(e, []);
    }
    byEpisode.get(e)!.push({ x: t, y: h });
  }
  if (byEpisode.size === 0) {
    throw new Error(
      `${table.path}: no rows match episodes [${spec.episodes.join(", ")}]`,
    );
  }
  const episodes = [...byEpisode.keys()].sort((a, b) => a - b);
  const series: Series[] = episodes.map((e, k) => ({
    label: `episode ${e}`,
    color: PALETTE[k % PALETTE.length],
    points: byEpisode.get(e)!,
  }));
  return {
    title: spec.title,
    xLabel: "step",
    yLabel: "interaction steps H",
    series,
    ribbons: [],
  };
}

export function defaultCurveTitle(inputs: string[]): string {
  return inputs.map((p) => path.basename(p, ".csv")).join(" vs ");
}

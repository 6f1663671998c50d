/** Shared geometry: data domains, tick placement, and the data-to-pixel
 * transform used identically by the SVG and PNG backends. */
import { Chart } from "./chart";

export const WIDTH = 800;
export const HEIGHT = 480;
export const MARGIN = { left: 70, right: 20, top: 40, bottom: 50 };

export interface Extent {
  min: number;
  max: number;
}

export interface Layout {
  x: Extent;
  y: Extent;
  xTicks: number[];
  yTicks: number[];
}

function extend(e: Extent, v: number): void {
  e.min = Math.min(e.min, v);
  e.max = Math.max(e.max, v);
}

/** Round-number ticks covering [min, max] with about `count` steps. */
export function ticks(min: number, max: number, count: number): number[] {
  const span = max - min;
  if (span <= 0) {
    return [min];
  }
  const raw = span / count;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const norm = raw / mag;
  const step = (norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1) * mag;
  const out: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function computeLayout(chart: Chart): Layout {
  const x: Extent = { min: Infinity, max: -Infinity };
  const y: Extent = { min: Infinity, max: -Infinity };
  for (const s of chart.series) {
    for (const p of s.points) {
      extend(x, p.x);
      extend(y, p.y);
    }
  }
  for (const r of chart.ribbons) {
    for (let i = 0; i < r.x.length; i++) {
      extend(x, r.x[i]);
      extend(y, r.lower[i]);
      extend(y, r.upper[i]);
    }
  }
  if (!Number.isFinite(x.min) || !Number.isFinite(y.min)) {
    throw new Error("chart has no points");
  }
  if (x.max === x.min) {
    x.max = x.min + 1;
  }
  if (y.max === y.min) {
    y.min -= 1;
    y.max += 1;
  }
  const pad = (y.max - y.min) * 0.05;
  y.min -= pad;
  y.max += pad;
  return {
    x,
    y,
    xTicks: ticks(x.min, x.max, 6),
    yTicks: ticks(y.min, y.max, 6),
  };
}

export function toPixelX(layout: Layout, v: number): number {
  const inner = WIDTH - MARGIN.left - MARGIN.right;
  return MARGIN.left + ((v - layout.x.min) / (layout.x.max - layout.x.min)) * inner;
}

export function toPixelY(layout: Layout, v: number): number {
  const inner = HEIGHT - MARGIN.top - MARGIN.bottom;
  return HEIGHT - MARGIN.bottom - ((v - layout.y.min) / (layout.y.max - layout.y.min)) * inner;
}

/** Fixed-precision tick label so both backends agree byte-for-byte. */
export function tickLabel(v: number): string {
  if (Number.isInteger(v) && Math.abs(v) < 1e7) {
    return String(v);
  }
  if (Math.abs(v) >= 1000) {
    return v.toFixed(0);
  }
  return v.toFixed(Math.abs(v) < 1 ? 2 : 1);
}

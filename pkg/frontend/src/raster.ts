/** PNG backend: a small deterministic software rasterizer (solid fills,
 * alpha blending, 1px-grid lines, bitmap text) over an RGB byte canvas. */
import { Chart } from "./chart";
import { GLYPH_H, GLYPH_SPACING, GLYPH_W, glyph, textWidth } from "./font";
import {
  HEIGHT,
  Layout,
  MARGIN,
  WIDTH,
  computeLayout,
  tickLabel,
  toPixelX,
  toPixelY,
} from "./layout";

export class Canvas {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array; // RGB, row-major

  constructor(width: number, height: number) {
    this.width = width;
    this.height = height;
    this.data = new Uint8Array(width * height * 3).fill(255);
  }

  blend(x: number, y: number, rgb: [number, number, number], alpha: number): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) {
      return;
    }
    const k = (y * this.width + x) * 3;
    for (let c = 0; c < 3; c++) {
      this.data[k + c] = Math.round(
        this.data[k + c] * (1 - alpha) + rgb[c] * alpha,
      );
    }
  }

  fillRect(
    x0: number,
    y0: number,
    w: number,
    h: number,
    rgb: [number, number, number],
    alpha = 1.0,
  ): void {
    for (let y = y0; y < y0 + h; y++) {
      for (let x = x0; x < x0 + w; x++) {
        this.blend(x, y, rgb, alpha);
      }
    }
  }

  /** Straight segment drawn by stepping the longer axis one pixel at a
   * time; thickness is applied as a square stamp. */
  line(
    x0: number,
    y0: number,
    x1: number,
    y1: number,
    rgb: [number, number, number],
    thickness = 1,
  ): void {
    const steps = Math.max(Math.abs(x1 - x0), Math.abs(y1 - y0), 1);
    const r = Math.floor(thickness / 2);
    for (let s = 0; s <= steps; s++) {
      const x = Math.round(x0 + ((x1 - x0) * s) / steps);
      const y = Math.round(y0 + ((y1 - y0) * s) / steps);
      for (let dy = -r; dy < thickness - r; dy++) {
        for (let dx = -r; dx < thickness - r; dx++) {
          this.blend(x + dx, y + dy, rgb, 1.0);
        }
      }
    }
  }

  text(
    x: number,
    y: number,
    content: string,
    rgb: [number, number, number],
    scale = 1,
  ): void {
    let cx = x;
    for (const ch of content) {
      const rows = glyph(ch);
      for (let gy = 0; gy < GLYPH_H; gy++) {
        for (let gx = 0; gx < GLYPH_W; gx++) {
          if ((rows[gy] >> (GLYPH_W - 1 - gx)) & 1) {
            this.fillRect(cx + gx * scale, y + gy * scale, scale, scale, rgb);
          }
        }
      }
      cx += (GLYPH_W + GLYPH_SPACING) * scale;
    }
  }

  /** Vertical text for the y-axis label (rotated 90 degrees CCW). */
  textVertical(
    x: number,
    y: number,
    content: string,
    rgb: [number, number, number],
    scale = 1,
  ): void {
    let cy = y;
    for (const ch of content) {
      const rows = glyph(ch);
      for (let gy = 0; gy < GLYPH_H; gy++) {
        for (let gx = 0; gx < GLYPH_W; gx++) {
          if ((rows[gy] >> (GLYPH_W - 1 - gx)) & 1) {
            // rotate: glyph (gx, gy) -> canvas (x + gy, y - gx)
            this.fillRect(x + gy * scale, cy - gx * scale, scale, scale, rgb);
          }
        }
      }
      cy -= (GLYPH_W + GLYPH_SPACING) * scale;
    }
  }
}

export function parseColor(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}

const AXIS: [number, number, number] = [51, 51, 51];
const TITLE: [number, number, number] = [17, 17, 17];

function drawRibbon(
  canvas: Canvas,
  layout: Layout,
  x: number[],
  lower: number[],
  upper: number[],
  rgb: [number, number, number],
): void {
  // fill per pixel column between the interpolated band edges
  for (let i = 0; i + 1 < x.length; i++) {
    const px0 = toPixelX(layout, x[i]);
    const px1 = toPixelX(layout, x[i + 1]);
    // skip the first column of follow-up segments so shared boundary
    // pixels are not blended twice
    const from = i === 0 ? Math.ceil(px0) : Math.floor(px0) + 1;
    const to = Math.floor(px1);
    for (let px = from; px <= to; px++) {
      const f = px1 === px0 ? 0 : (px - px0) / (px1 - px0);
      const lo = lower[i] + (lower[i + 1] - lower[i]) * f;
      const hi = upper[i] + (upper[i + 1] - upper[i]) * f;
      const yTop = Math.round(toPixelY(layout, hi));
      const yBot = Math.round(toPixelY(layout, lo));
      for (let py = yTop; py <= yBot; py++) {
        canvas.blend(px, py, rgb, 0.2);
      }
    }
  }
}

export function rasterize(chart: Chart): Canvas {
  const layout = computeLayout(chart);
  const canvas = new Canvas(WIDTH, HEIGHT);
  const x0 = MARGIN.left;
  const y0 = MARGIN.top;
  const x1 = WIDTH - MARGIN.right;
  const y1 = HEIGHT - MARGIN.bottom;

  for (const r of chart.ribbons) {
    drawRibbon(canvas, layout, r.x, r.lower, r.upper, parseColor(r.color));
  }
  for (const s of chart.series) {
    const rgb = parseColor(s.color);
    for (let i = 0; i + 1 < s.points.length; i++) {
      canvas.line(
        Math.round(toPixelX(layout, s.points[i].x)),
        Math.round(toPixelY(layout, s.points[i].y)),
        Math.round(toPixelX(layout, s.points[i + 1].x)),
        Math.round(toPixelY(layout, s.points[i + 1].y)),
        rgb,
        2,
      );
    }
    if (s.points.length === 1) {
      const px = Math.round(toPixelX(layout, s.points[0].x));
      const py = Math.round(toPixelY(layout, s.points[0].y));
      canvas.fillRect(px - 1, py - 1, 3, 3, rgb);
    }
  }

  // frame on top of the data so the border stays crisp
  canvas.line(x0, y0, x1, y0, AXIS);
  canvas.line(x0, y1, x1, y1, AXIS);
  canvas.line(x0, y0, x0, y1, AXIS);
  canvas.line(x1, y0, x1, y1, AXIS);

  for (const t of layout.xTicks) {
    const px = Math.round(toPixelX(layout, t));
    canvas.line(px, y1, px, y1 + 5, AXIS);
    const label = tickLabel(t);
    canvas.text(px - Math.floor(textWidth(label, 1) / 2), y1 + 9, label, AXIS);
  }
  for (const t of layout.yTicks) {
    const py = Math.round(toPixelY(layout, t));
    canvas.line(x0 - 5, py, x0, py, AXIS);
    const label = tickLabel(t);
    canvas.text(x0 - 8 - textWidth(label, 1), py - 3, label, AXIS);
  }

  chart.series.forEach((s, k) => {
    const lx = x1 - 150;
    const ly = y0 + 10 + 16 * k;
    canvas.line(lx, ly, lx + 20, ly, parseColor(s.color), 2);
    canvas.text(lx + 26, ly - 3, s.label, AXIS);
  });

  canvas.text(
    Math.round(WIDTH / 2 - textWidth(chart.title, 2) / 2),
    10,
    chart.title,
    TITLE,
    2,
  );
  canvas.text(
    Math.round(WIDTH / 2 - textWidth(chart.xLabel, 1) / 2),
    HEIGHT - 18,
    chart.xLabel,
    AXIS,
  );
  canvas.textVertical(
    10,
    Math.round(HEIGHT / 2 + textWidth(chart.yLabel, 1) / 2),
    chart.yLabel,
    AXIS,
  );
  return canvas;
}

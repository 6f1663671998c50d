/** SVG backend: pure string assembly with fixed number formatting, so the
 * same chart model always produces identical bytes. */
import { Chart } from "./chart";
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

function fmt(v: number): string {
  return v.toFixed(2);
}

function polyline(points: { x: number; y: number }[], layout: Layout): string {
  return points
    .map((p) => `${fmt(toPixelX(layout, p.x))},${fmt(toPixelY(layout, p.y))}`)
    .join(" ");
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

export function renderSvg(chart: Chart): string {
  const layout = computeLayout(chart);
  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
  );
  out.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  out.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333333"/>`,
  );

  for (const t of layout.xTicks) {
    const px = fmt(toPixelX(layout, t));
    const y0 = HEIGHT - MARGIN.bottom;
    out.push(
      `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="#333333"/>`,
    );
    out.push(
      `<text x="${px}" y="${y0 + 18}" font-family="monospace" font-size="12" text-anchor="middle" fill="#333333">${tickLabel(t)}</text>`,
    );
  }
  for (const t of layout.yTicks) {
    const py = fmt(toPixelY(layout, t));
    out.push(
      `<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#333333"/>`,
    );
    out.push(
      `<text x="${MARGIN.left - 8}" y="${py}" font-family="monospace" font-size="12" text-anchor="end" dominant-baseline="middle" fill="#333333">${tickLabel(t)}</text>`,
    );
  }

  for (const r of chart.ribbons) {
    const fwd = r.x.map(
      (xv, i) =>
        `${fmt(toPixelX(layout, xv))},${fmt(toPixelY(layout, r.upper[i]))}`,
    );
    const back = [...r.x.keys()]
      .reverse()
      .map(
        (i) =>
          `${fmt(toPixelX(layout, r.x[i]))},${fmt(toPixelY(layout, r.lower[i]))}`,
      );
    out.push(
      `<polygon points="${[...fwd, ...back].join(" ")}" fill="${r.color}" fill-opacity="0.2"/>`,
    );
  }

  for (const s of chart.series) {
    out.push(
      `<polyline points="${polyline(s.points, layout)}" fill="none" stroke="${s.color}" stroke-width="2"/>`,
    );
  }

  // legend in the top-right corner of the plot area
  chart.series.forEach((s, k) => {
    const lx = WIDTH - MARGIN.right - 150;
    const ly = MARGIN.top + 14 + 16 * k;
    out.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 20}" y2="${ly}" stroke="${s.color}" stroke-width="2"/>`,
    );
    out.push(
      `<text x="${lx + 26}" y="${ly + 4}" font-family="monospace" font-size="12" fill="#333333">${esc(s.label)}</text>`,
    );
  });

  out.push(
    `<text x="${WIDTH / 2}" y="22" font-family="monospace" font-size="16" text-anchor="middle" fill="#111111">${esc(chart.title)}</text>`,
  );
  out.push(
    `<text x="${WIDTH / 2}" y="${HEIGHT - 12}" font-family="monospace" font-size="13" text-anchor="middle" fill="#333333">${esc(chart.xLabel)}</text>`,
  );
  out.push(
    `<text x="16" y="${HEIGHT / 2}" font-family="monospace" font-size="13" text-anchor="middle" fill="#333333" transform="rotate(-90 16 ${HEIGHT / 2})">${esc(chart.yLabel)}</text>`,
  );
  out.push("</svg>");
  return out.join("\n") + "\n";
}

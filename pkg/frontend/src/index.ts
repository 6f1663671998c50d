/** Figure generation from training/evaluation CSV logs. */
import * as fs from "node:fs";
import * as path from "node:path";

import {
  Chart,
  CurveSpec,
  HTraceSpec,
  buildCurveChart,
  buildHTraceChart,
} from "./chart";
import { encodePng } from "./png";
import { rasterize } from "./raster";
import { renderSvg } from "./svg";

export { MissingColumnError, readCsv, requireColumns } from "./csv";
export { smooth, meanStd } from "./stats";
export {
  buildCurveChart,
  buildHTraceChart,
  Chart,
  CurveSpec,
  HTraceSpec,
} from "./chart";
export { renderSvg } from "./svg";
export { rasterize } from "./raster";
export { encodePng } from "./png";

/** Write `<stem>.svg` and `<stem>.png` for a chart; returns both paths. */
export function writeChart(chart: Chart, outDir: string, stem: string): string[] {
  fs.mkdirSync(outDir, { recursive: true });
  const svgPath = path.join(outDir, `${stem}.svg`);
  const pngPath = path.join(outDir, `${stem}.png`);
  fs.writeFileSync(svgPath, renderSvg(chart));
  fs.writeFileSync(pngPath, encodePng(rasterize(chart)));
  return [svgPath, pngPath];
}

export function plotLearningCurves(spec: CurveSpec, outDir: string, stem = "learning_curves"): string[] {
  return writeChart(buildCurveChart(spec), outDir, stem);
}

export function plotHTrace(spec: HTraceSpec, outDir: string, stem = "h_trace"): string[] {
  return writeChart(buildHTraceChart(spec), outDir, stem);
}

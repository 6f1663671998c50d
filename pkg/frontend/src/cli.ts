#!/usr/bin/env node
/** plot-kit: offline figure generation from training/evaluation CSV logs.
 *
 *   plot-kit curves  --in a.csv[,b.csv] [--in other.csv] --out DIR
 *                    [--label NAME] [--x episode] [--y lower_return]
 *                    [--phase cross_train] [--window 5] [--title T]
 *   plot-kit h-trace --in h_trace.csv --out DIR [--episodes 0,5,29]
 *
 * Each --in argument forms one group; comma-separated paths inside a group
 * are averaged into a mean curve with a population-standard-deviation band.
 */
import * as path from "node:path";
import { parseArgs } from "node:util";

import { MissingColumnError } from "./csv";
import { plotHTrace, plotLearningCurves } from "./index";

function usageError(message: string): never {
  process.stderr.write(`plot-kit: ${message}\n`);
  process.exit(2);
}

function runCurves(argv: string[]): string[] {
  const { values } = parseArgs({
    args: argv,
    options: {
      in: { type: "string", multiple: true },
      out: { type: "string" },
      label: { type: "string", multiple: true },
      x: { type: "string", default: "episode" },
      y: { type: "string", default: "lower_return" },
      phase: { type: "string", default: "" },
      window: { type: "string", default: "5" },
      title: { type: "string" },
      stem: { type: "string", default: "learning_curves" },
    },
  });
  if (!values.in || values.in.length === 0 || !values.out) {
    usageError("curves requires --in and --out");
  }
  const labels = values.label ?? [];
  const groups = values.in.map((arg, k) => {
    const inputs = arg.split(",");
    const label = labels[k] ?? path.basename(inputs[0], ".csv");
    return { label, inputs };
  });
  const window = Number(values.window);
  if (!Number.isInteger(window) || window < 1) {
    usageError(`--window must be an integer >= 1, got ${values.window}`);
  }
  return plotLearningCurves(
    {
      groups,
      xColumn: values.x!,
      yColumn: values.y!,
      phase: values.phase!,
      smoothingWindow: window,
      title: values.title ?? `${values.y} by ${values.x}`,
      xLabel: values.x!,
      yLabel: values.y!,
    },
    values.out,
    values.stem!,
  );
}

function runHTrace(argv: string[]): string[] {
  const { values } = parseArgs({
    args: argv,
    options: {
      in: { type: "string" },
      out: { type: "string" },
      episodes: { type: "string", default: "" },
      title: { type: "string", default: "interaction interval trace" },
      stem: { type: "string", default: "h_trace" },
    },
  });
  if (!values.in || !values.out) {
    usageError("h-trace requires --in and --out");
  }
  const episodes =
    values.episodes === ""
      ? []
      : values.episodes!.split(",").map((s) => {
          const v = Number(s);
          if (!Number.isInteger(v)) {
            usageError(`--episodes must be comma-separated integers, got ${s}`);
          }
          return v;
        });
  return plotHTrace(
    { input: values.in, episodes, title: values.title! },
    values.out,
    values.stem!,
  );
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    let written: string[];
    if (command === "curves") {
      written = runCurves(rest);
    } else if (command === "h-trace") {
      written = runHTrace(rest);
    } else {
      usageError(`unknown command "${command ?? ""}"; use curves or h-trace`);
    }
    for (const p of written) {
      process.stdout.write(`${p}\n`);
    }
    return 0;
  } catch (err) {
    if (err instanceof MissingColumnError) {
      process.stderr.write(`plot-kit: ${err.message}\n`);
      return 3;
    }
    process.stderr.write(`plot-kit: ${(err as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}

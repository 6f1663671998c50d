/** End-to-end CLI tests against the compiled dist/cli.js. */
import { execFileSync, spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

const ROOT = path.join(__dirname, "..");
const CLI = path.join(ROOT, "dist", "cli.js");
const FIXTURES = path.join(__dirname, "fixtures");

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "plot-kit-cli-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

beforeAll(() => {
  if (!fs.existsSync(CLI)) {
    execFileSync("tsc", ["-p", "tsconfig.json"], { cwd: ROOT });
  }
});

function run(args: string[]) {
  return spawnSync("node", [CLI, ...args], { encoding: "utf8" });
}

describe("plot-kit CLI", () => {
  it("curves writes an SVG and a PNG and prints their paths", () => {
    const out = path.join(tmp, "curves");
    const res = run([
      "curves",
      "--in",
      `${path.join(FIXTURES, "run_a.csv")},${path.join(FIXTURES, "run_b.csv")}`,
      "--out",
      out,
      "--label",
      "demo",
      "--phase",
      "cross_train",
    ]);
    expect(res.status).toBe(0);
    const written = res.stdout.trim().split("\n");
    expect(written).toHaveLength(2);
    for (const p of written) {
      expect(fs.existsSync(p)).toBe(true);
      expect(fs.statSync(p).size).toBeGreaterThan(0);
    }
  });

  it("h-trace writes an SVG and a PNG", () => {
    const out = path.join(tmp, "htrace");
    const res = run([
      "h-trace",
      "--in",
      path.join(FIXTURES, "h_trace.csv"),
      "--out",
      out,
      "--episodes",
      "0,5",
    ]);
    expect(res.status).toBe(0);
    expect(fs.existsSync(path.join(out, "h_trace.svg"))).toBe(true);
    expect(fs.existsSync(path.join(out, "h_trace.png"))).toBe(true);
  });

  it("a CSV without the required columns exits 3 and names them", () => {
    const res = run([
      "curves",
      "--in",
      path.join(FIXTURES, "missing_columns.csv"),
      "--out",
      path.join(tmp, "bad"),
    ]);
    expect(res.status).toBe(3);
    expect(res.stderr).toContain("missing required column(s)");
    expect(res.stderr).toContain("episode");
    expect(res.stderr).toContain("lower_return");
  });

  it("missing required flags exit 2", () => {
    const res = run(["curves", "--out", path.join(tmp, "noin")]);
    expect(res.status).toBe(2);
  });

  it("unknown commands exit 2", () => {
    const res = run(["scatter"]);
    expect(res.status).toBe(2);
  });
});

/** Strict CSV reading for the training/evaluation log contracts.
 *
 * The logs are plain comma-separated files with a header row and no quoted
 * fields; parsing is deliberately strict so malformed inputs fail loudly
 * instead of producing empty plots.
 */
import * as fs from "node:fs";

export class MissingColumnError extends Error {
  readonly missing: string[];

  constructor(path: string, missing: string[], present: string[]) {
    super(
      `${path}: missing required column(s) ${missing.join(", ")}; ` +
        `file has: ${present.join(", ")}`,
    );
    this.name = "MissingColumnError";
    this.missing = missing;
  }
}

export interface Table {
  path: string;
  columns: string[];
  rows: string[][];
}

export function readCsv(path: string): Table {
  const text = fs.readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error(`${path}: empty CSV file`);
  }
  const columns = lines[0].split(",");
  const rows: string[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new Error(
        `${path}: row ${i + 1} has ${cells.length} cells, header has ${columns.length}`,
      );
    }
    rows.push(cells);
  }
  return { path, columns, rows };
}

/** Assert the named columns exist; raise one error naming every absentee. */
export function requireColumns(table: Table, names: string[]): void {
  const missing = names.filter((n) => !table.columns.includes(n));
  if (missing.length > 0) {
    throw new MissingColumnError(table.path, missing, table.columns);
  }
}

export function column(table: Table, name: string): string[] {
  requireColumns(table, [name]);
  const k = table.columns.indexOf(name);
  return table.rows.map((r) => r[k]);
}

export function numericColumn(table: Table, name: string): number[] {
  return column(table, name).map((v, i) => {
    const x = Number(v);
    if (!Number.isFinite(x)) {
      throw new Error(
        `${table.path}: column ${name}, row ${i + 2}: not a finite number (${v})`,
      );
    }
    return x;
  });
}

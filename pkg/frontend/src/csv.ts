/**
 * Minimal CSV reader for the simulator's numeric tables: one header row of
 * column names, then float rows.
 */
import { readFileSync } from "fs";

export interface Table {
  columns: string[];
  rows: number[][];
}

export class MissingColumnError extends Error {
  constructor(public readonly missing: string[], file: string) {
    super(`missing column(s) ${missing.join(", ")} in ${file}`);
  }
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new Error(`row ${i} has ${parts.length} fields, expected ${columns.length}`);
    }
    rows.push(parts.map(Number));
  }
  return { columns, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"));
}

/** Column index lookup; throws naming every absent column. */
export function columnIndices(table: Table, names: string[], file = "<csv>"): number[] {
  const missing = names.filter((n) => !table.columns.includes(n));
  if (missing.length > 0) {
    throw new MissingColumnError(missing, file);
  }
  return names.map((n) => table.columns.indexOf(n));
}

export function column(table: Table, name: string, file = "<csv>"): number[] {
  const [idx] = columnIndices(table, [name], file);
  return table.rows.map((r) => r[idx]);
}

export function assertMonotoneTime(table: Table, file = "<csv>"): void {
  const t = column(table, "t", file);
  for (let i = 1; i < t.length; i++) {
    if (!(t[i] > t[i - 1])) {
      throw new Error(`time axis not strictly increasing at row ${i} in ${file}`);
    }
  }
}

#!/usr/bin/env node
/**
 * Render figures from a formlearn run directory.
 *
 * Usage:
 *   node dist/main.js <kind...> --run <run-dir> [--out-dir <dir>] [--agent N]
 *
 * Kinds: estimation tracking formation consensus approximation all
 * Inputs: <run-dir>/log.csv, and <run-dir>/metrics/approx_series.csv for
 * the approximation overlay.  Output: one SVG per kind.
 */
import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import { readCsv } from "./csv.js";
import {
  FIGURE_KINDS,
  FigureKind,
  approximationFigure,
  consensusFigure,
  estimationFigure,
  formationFigure,
  trackingFigure,
} from "./figures.js";

export function renderKind(kind: FigureKind, runDir: string, agent: number): string {
  if (kind === "approximation") {
    const file = join(runDir, "metrics", "approx_series.csv");
    return approximationFigure(readCsv(file), file, agent);
  }
  const file = join(runDir, "log.csv");
  const log = readCsv(file);
  switch (kind) {
    case "estimation":
      return estimationFigure(log, file);
    case "tracking":
      return trackingFigure(log, file);
    case "formation":
      return formationFigure(log, file);
    case "consensus":
      return consensusFigure(log, file);
  }
}

function main(argv: string[]): number {
  const kinds: FigureKind[] = [];
  let runDir = "";
  let outDir = "";
  let agent = 1;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--run") runDir = argv[++i];
    else if (a === "--out-dir") outDir = argv[++i];
    else if (a === "--agent") agent = Number(argv[++i]);
    else if (a === "all") kinds.push(...FIGURE_KINDS);
    else if ((FIGURE_KINDS as readonly string[]).includes(a)) kinds.push(a as FigureKind);
    else {
      console.error(`unknown argument ${a}`);
      return 2;
    }
  }
  if (!runDir || kinds.length === 0) {
    console.error("usage: main.js <kind...|all> --run <dir> [--out-dir <dir>] [--agent N]");
    return 2;
  }
  outDir = outDir || join(runDir, "figures");
  mkdirSync(outDir, { recursive: true });
  for (const kind of kinds) {
    try {
      const svg = renderKind(kind, runDir, agent);
      const out = join(outDir, `${kind}.svg`);
      writeFileSync(out, svg);
      console.log(`wrote ${out}`);
    } catch (e) {
      console.error(`${kind}: ${(e as Error).message}`);
      return 1;
    }
  }
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}

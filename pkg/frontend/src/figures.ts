/**
 * The five figure kinds built from the published CSV schema:
 *
 *   estimation    — leader-position estimates vs the leader, one panel per axis
 *   tracking      — agent positions vs the leader, one panel per axis
 *   formation     — planar trajectories + the final formation polygon
 *   consensus     — per-channel weight norms and pairwise weight gaps
 *   approximation — true vs network-reconstructed uncertainty overlays
 *
 * Inputs: a run directory's log.csv (first four kinds) and
 * metrics/approx_series.csv (approximation).
 */
import { Table, assertMonotoneTime, column, columnIndices } from "./csv.js";
import { PALETTE, Panel, Series, renderFigure } from "./svg.js";

export const FIGURE_KINDS = [
  "estimation",
  "tracking",
  "formation",
  "consensus",
  "approximation",
] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface LogShape {
  nAgents: number;
  nAxes: number;
}

/** Infer agent/axis counts from the log header. */
export function logShape(log: Table): LogShape {
  let nAxes = 0;
  while (log.columns.includes(`p0_${nAxes + 1}`)) nAxes++;
  let nAgents = 0;
  while (log.columns.includes(`phat${nAgents + 1}_1`)) nAgents++;
  if (nAxes === 0 || nAgents === 0) {
    throw new Error("log header does not look like a run log (no p0_*/phat* columns)");
  }
  return { nAgents, nAxes };
}

function seriesFromColumns(log: Table, x: number[], name: string, label: string, file: string,
                           style: Partial<Series> = {}): Series {
  return { label, x, y: column(log, name, file), ...style };
}

export function estimationFigure(log: Table, file: string): string {
  assertMonotoneTime(log, file);
  const { nAgents, nAxes } = logShape(log);
  const t = column(log, "t", file);
  const panels: Panel[] = [];
  for (let k = 1; k <= nAxes; k++) {
    const series: Series[] = [
      seriesFromColumns(log, t, `p0_${k}`, "leader", file, { color: "#000", dash: "6,3", width: 1.8 }),
    ];
    for (let i = 1; i <= nAgents; i++) {
      series.push(seriesFromColumns(log, t, `phat${i}_${k}`, `agent ${i}`, file,
                                    { color: PALETTE[(i - 1) % PALETTE.length] }));
    }
    panels.push({
      title: `Leader-position estimate, axis ${k}`,
      xLabel: "t [s]",
      yLabel: `axis ${k}`,
      series,
    });
  }
  return renderFigure(panels, { kind: "estimation" });
}

export function trackingFigure(log: Table, file: string): string {
  assertMonotoneTime(log, file);
  const { nAgents, nAxes } = logShape(log);
  const t = column(log, "t", file);
  const panels: Panel[] = [];
  for (let k = 1; k <= nAxes; k++) {
    const series: Series[] = [
      seriesFromColumns(log, t, `p0_${k}`, "leader", file, { color: "#000", dash: "6,3", width: 1.8 }),
    ];
    for (let i = 1; i <= nAgents; i++) {
      series.push(seriesFromColumns(log, t, `p${i}_${k}`, `agent ${i}`, file,
                                    { color: PALETTE[(i - 1) % PALETTE.length] }));
    }
    panels.push({
      title: `Position tracking, axis ${k}`,
      xLabel: "t [s]",
      yLabel: `axis ${k}`,
      series,
    });
  }
  return renderFigure(panels, { kind: "tracking" });
}

export function formationFigure(log: Table, file: string): string {
  assertMonotoneTime(log, file);
  const { nAgents } = logShape(log);
  const series: Series[] = [
    {
      label: "leader",
      x: column(log, "p0_1", file),
      y: column(log, "p0_2", file),
      color: "#000",
      dash: "6,3",
      width: 1.8,
    },
  ];
  for (let i = 1; i <= nAgents; i++) {
    series.push({
      label: `agent ${i}`,
      x: column(log, `p${i}_1`, file),
      y: column(log, `p${i}_2`, file),
      color: PALETTE[(i - 1) % PALETTE.length],
    });
  }
  // final formation polygon (closed loop through the agents' last points)
  const lastX: number[] = [];
  const lastY: number[] = [];
  for (let i = 1; i <= nAgents; i++) {
    const xs = column(log, `p${i}_1`, file);
    const ys = column(log, `p${i}_2`, file);
    lastX.push(xs[xs.length - 1]);
    lastY.push(ys[ys.length - 1]);
  }
  lastX.push(lastX[0]);
  lastY.push(lastY[0]);
  series.push({ label: "final formation", x: lastX, y: lastY, color: "#555", width: 2.2 });
  const panel: Panel = {
    title: "Planar formation trajectories (axes 1-2)",
    xLabel: "axis 1",
    yLabel: "axis 2",
    series,
    square: true,
  };
  return renderFigure([panel], { kind: "formation" });
}

export function consensusFigure(log: Table, file: string): string {
  assertMonotoneTime(log, file);
  const { nAgents, nAxes } = logShape(log);
  if (nAgents < 2) {
    throw new Error("pairwise weight gaps are undefined for a single agent");
  }
  columnIndices(log, [`wnorm1_1`, `wdiffmax_1`], file);
  const t = column(log, "t", file);
  const normPanelSeries: Series[] = [];
  for (let i = 1; i <= nAgents; i++) {
    for (let k = 1; k <= nAxes; k++) {
      normPanelSeries.push(
        seriesFromColumns(log, t, `wnorm${i}_${k}`, `agent ${i}, ch ${k}`, file, {
          color: PALETTE[(i - 1) % PALETTE.length],
          dash: k === 1 ? undefined : k === 2 ? "4,3" : "1.5,2",
        })
      );
    }
  }
  const gapSeries: Series[] = [];
  for (let k = 1; k <= nAxes; k++) {
    gapSeries.push(
      seriesFromColumns(log, t, `wdiffmax_${k}`, `channel ${k}`, file, {
        color: PALETTE[(k - 1) % PALETTE.length],
      })
    );
  }
  return renderFigure(
    [
      {
        title: "Network weight norms",
        xLabel: "t [s]",
        yLabel: "||W||",
        series: normPanelSeries,
      },
      {
        title: "Max pairwise weight gap",
        xLabel: "t [s]",
        yLabel: "max gap",
        series: gapSeries,
      },
    ],
    { kind: "consensus" }
  );
}

export function approximationFigure(approx: Table, file: string, agent = 1): string {
  const need = ["t", "agent", "channel", "g_true", "g_nn"];
  const [ti, ai, ci, gi, ni] = columnIndices(approx, need, file);
  const channels = [...new Set(approx.rows.map((r) => r[ci]))].sort((a, b) => a - b);
  if (channels.length === 0) {
    throw new Error(`no approximation rows in ${file}`);
  }
  const panels: Panel[] = [];
  for (const ch of channels) {
    const rows = approx.rows.filter((r) => r[ai] === agent && r[ci] === ch);
    if (rows.length === 0) {
      throw new Error(`no rows for agent ${agent}, channel ${ch} in ${file}`);
    }
    const t = rows.map((r) => r[ti]);
    panels.push({
      title: `Uncertainty approximation, agent ${agent}, channel ${ch}`,
      xLabel: "t [s]",
      yLabel: `G_${ch}`,
      series: [
        { label: "true", x: t, y: rows.map((r) => r[gi]), color: "#000", width: 1.8 },
        { label: "network", x: t, y: rows.map((r) => r[ni]), color: "#d62728", dash: "5,3" },
      ],
    });
  }
  return renderFigure(panels, { kind: "approximation" });
}

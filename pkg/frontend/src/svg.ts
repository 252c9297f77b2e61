/**
 * Hand-rolled SVG line-chart builder: multi-panel figures with axes,
 * ticks, polyline series and a legend.  Output is deterministic for
 * identical inputs (fixed precision, no timestamps or randomness).
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color?: string;
  dash?: string;
  width?: number;
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  /** force equal x/y scaling (trajectory plots) */
  square?: boolean;
}

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const W = 640;
const PANEL_H = 240;
const MARGIN = { left: 64, right: 16, top: 28, bottom: 40 };

function fmt(v: number): string {
  if (!isFinite(v)) return "0";
  return Number(v.toPrecision(6)).toString();
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) {
    hi = lo + 1;
    lo = lo - 1;
  }
  const span = hi - lo;
  const step0 = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((s) => span / s <= n) ?? candidates[candidates.length - 1];
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

function extent(values: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of values) {
    for (const v of arr) {
      if (isFinite(v)) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
  }
  if (!isFinite(lo)) {
    lo = 0;
    hi = 1;
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  return [lo, hi];
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function renderPanel(panel: Panel, yOffset: number): string {
  const innerW = W - MARGIN.left - MARGIN.right;
  const innerH = PANEL_H - MARGIN.top - MARGIN.bottom;
  let [xLo, xHi] = extent(panel.series.map((s) => s.x));
  let [yLo, yHi] = extent(panel.series.map((s) => s.y));
  const pad = 0.04 * (yHi - yLo);
  yLo -= pad;
  yHi += pad;
  if (panel.square) {
    const xSpan = xHi - xLo;
    const ySpan = yHi - yLo;
    const scale = Math.max(xSpan / innerW, ySpan / innerH);
    const xMid = (xLo + xHi) / 2;
    const yMid = (yLo + yHi) / 2;
    xLo = xMid - (scale * innerW) / 2;
    xHi = xMid + (scale * innerW) / 2;
    yLo = yMid - (scale * innerH) / 2;
    yHi = yMid + (scale * innerH) / 2;
  }
  const sx = (v: number) => MARGIN.left + ((v - xLo) / (xHi - xLo)) * innerW;
  const sy = (v: number) => yOffset + MARGIN.top + innerH - ((v - yLo) / (yHi - yLo)) * innerH;

  const parts: string[] = [];
  const axisY0 = yOffset + MARGIN.top;
  parts.push(
    `<rect x="${MARGIN.left}" y="${axisY0}" width="${innerW}" height="${innerH}" fill="none" stroke="#444" stroke-width="1"/>`
  );
  for (const tx of niceTicks(xLo, xHi)) {
    const px = sx(tx);
    parts.push(`<line x1="${fmt(px)}" y1="${fmt(axisY0 + innerH)}" x2="${fmt(px)}" y2="${fmt(axisY0 + innerH + 4)}" stroke="#444"/>`);
    parts.push(
      `<text x="${fmt(px)}" y="${fmt(axisY0 + innerH + 16)}" font-size="10" text-anchor="middle" fill="#222">${fmt(tx)}</text>`
    );
    parts.push(
      `<line x1="${fmt(px)}" y1="${fmt(axisY0)}" x2="${fmt(px)}" y2="${fmt(axisY0 + innerH)}" stroke="#ddd" stroke-width="0.5"/>`
    );
  }
  for (const ty of niceTicks(yLo, yHi)) {
    const py = sy(ty);
    parts.push(`<line x1="${MARGIN.left - 4}" y1="${fmt(py)}" x2="${MARGIN.left}" y2="${fmt(py)}" stroke="#444"/>`);
    parts.push(
      `<text x="${MARGIN.left - 7}" y="${fmt(py + 3)}" font-size="10" text-anchor="end" fill="#222">${fmt(ty)}</text>`
    );
    parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(py)}" x2="${MARGIN.left + innerW}" y2="${fmt(py)}" stroke="#ddd" stroke-width="0.5"/>`
    );
  }
  panel.series.forEach((s, i) => {
    const color = s.color ?? PALETTE[i % PALETTE.length];
    const pts = s.x.map((xv, k) => `${fmt(sx(xv))},${fmt(sy(s.y[k]))}`).join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline class="series" fill="none" stroke="${color}" stroke-width="${s.width ?? 1.3}"${dash} points="${pts}"/>`
    );
  });
  parts.push(
    `<text x="${MARGIN.left + innerW / 2}" y="${fmt(axisY0 - 10)}" font-size="12" text-anchor="middle" fill="#000">${esc(panel.title)}</text>`
  );
  parts.push(
    `<text x="${MARGIN.left + innerW / 2}" y="${fmt(axisY0 + innerH + 32)}" font-size="11" text-anchor="middle" fill="#000">${esc(panel.xLabel)}</text>`
  );
  parts.push(
    `<text x="16" y="${fmt(axisY0 + innerH / 2)}" font-size="11" text-anchor="middle" fill="#000" transform="rotate(-90 16 ${fmt(axisY0 + innerH / 2)})">${esc(panel.yLabel)}</text>`
  );
  // legend
  let lx = MARGIN.left + 8;
  panel.series.forEach((s, i) => {
    const color = s.color ?? PALETTE[i % PALETTE.length];
    const ly = axisY0 + 12 + 12 * Math.floor(i / 4);
    const cx = lx + 110 * (i % 4);
    parts.push(`<line x1="${cx}" y1="${ly}" x2="${cx + 16}" y2="${ly}" stroke="${color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`);
    parts.push(`<text x="${cx + 20}" y="${ly + 3}" font-size="10" fill="#222">${esc(s.label)}</text>`);
  });
  return parts.join("\n");
}

export function renderFigure(panels: Panel[], meta: Record<string, string> = {}): string {
  const height = panels.length * PANEL_H;
  const body = panels.map((p, i) => renderPanel(p, i * PANEL_H)).join("\n");
  const metaStr = Object.entries(meta)
    .map(([k, v]) => `data-${k}="${esc(v)}"`)
    .join(" ");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${height}" ` +
    `viewBox="0 0 ${W} ${height}" ${metaStr}>\n<rect width="100%" height="100%" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}

/** Structural fingerprint used by the visual-regression checks. */
export function svgStructure(svg: string): { panels: number; series: number; points: number } {
  const panels = (svg.match(/<rect x="\d+/g) ?? []).length;
  const seriesMatches = svg.match(/<polyline class="series"[^>]*points="([^"]*)"/g) ?? [];
  let points = 0;
  for (const m of seriesMatches) {
    const pts = m.match(/points="([^"]*)"/);
    if (pts) points += pts[1].split(" ").length;
  }
  return { panels, series: seriesMatches.length, points };
}

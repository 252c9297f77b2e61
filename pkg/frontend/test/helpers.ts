/** Fixture builders mirroring the simulator's log schema. */

export function logColumns(nAgents: number, nAxes: number): string[] {
  const cols = ["t"];
  for (let k = 1; k <= nAxes; k++) cols.push(`p0_${k}`);
  for (let k = 1; k <= nAxes; k++) cols.push(`v0_${k}`);
  for (let i = 1; i <= nAgents; i++) {
    for (const what of ["p", "nu"]) {
      for (let k = 1; k <= nAxes; k++) cols.push(`${what}${i}_${k}`);
    }
    for (let k = 1; k <= nAxes; k++) cols.push(`phat${i}_${k}`);
    for (let k = 1; k <= nAxes; k++) cols.push(`vhat${i}_${k}`);
    for (const what of ["tau", "betadot"]) {
      for (let k = 1; k <= nAxes; k++) cols.push(`${what}${i}_${k}`);
    }
    cols.push(`z1norm${i}`, `z2norm${i}`);
  }
  for (let i = 1; i <= nAgents; i++) {
    for (let k = 1; k <= nAxes; k++) cols.push(`wnorm${i}_${k}`);
  }
  for (let k = 1; k <= nAxes; k++) cols.push(`wdiffmax_${k}`);
  return cols;
}

export function makeLogCsv(nAgents = 2, nAxes = 3, rows = 24): string {
  const cols = logColumns(nAgents, nAxes);
  const lines = [cols.join(",")];
  for (let r = 0; r < rows; r++) {
    const t = r * 0.5;
    const vals = cols.map((c) => {
      if (c === "t") return t;
      if (c.startsWith("p0_")) return 10 * Math.sin(t + Number(c.slice(3)));
      if (c.startsWith("v0_")) return 10 * Math.cos(t + Number(c.slice(3)));
      if (/^p\d+_/.test(c)) return 10 * Math.sin(t) + Number(c.slice(-1));
      if (/^phat\d+_/.test(c)) return 10 * Math.sin(t) + 0.1;
      if (/^wnorm/.test(c)) return 1 + 0.1 * t;
      if (/^wdiffmax/.test(c)) return Math.exp(-t);
      return 0.01 * t;
    });
    lines.push(vals.map((v) => String(v)).join(","));
  }
  return lines.join("\n") + "\n";
}

export function makeApproxCsv(nAgents = 2, channels = 3, rows = 16): string {
  const lines = ["t,agent,channel,g_true,g_nn"];
  for (let a = 1; a <= nAgents; a++) {
    for (let c = 1; c <= channels; c++) {
      for (let r = 0; r < rows; r++) {
        const t = r * 0.25;
        const g = 100 * Math.sin(t + c);
        lines.push([t, a, c, g, 0.95 * g].join(","));
      }
    }
  }
  return lines.join("\n") + "\n";
}

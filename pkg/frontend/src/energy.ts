/** Energy-vs-time overlays from diagnostics CSVs (pure pass-through). */

import { DiagnosticsRow } from "./csv.js";
import { buildChart, Series } from "./svg.js";

const PALETTE = ["#4361ee", "#e63946", "#2d6a4f", "#b5179e", "#f77f00", "#577590"];

export interface NamedDiagnostics {
  name: string;
  rows: DiagnosticsRow[];
}

export function energyChart(runs: NamedDiagnostics[]): string {
  if (runs.length === 0) throw new Error("no diagnostics data given");
  const series: Series[] = runs.map((run, i) => ({
    x: run.rows.map((r) => r.t),
    y: run.rows.map((r) => r.energy),
    color: PALETTE[i % PALETTE.length],
    label: run.name,
  }));
  return buildChart({
    title: "Free energy decay",
    xLabel: "time t",
    yLabel: "energy E(u_h)",
    series,
  });
}

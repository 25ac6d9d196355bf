/** Log-log error-vs-h plots with slope guides and fitted-slope labels. */

import { ConvergenceRow } from "./csv.js";
import { Annotation, buildChart, Series } from "./svg.js";

const PALETTE = ["#4361ee", "#e63946", "#2d6a4f", "#b5179e", "#f77f00", "#577590"];
const NORMS: Array<{ key: "l2_error" | "h1_error" | "h2_error"; label: string }> = [
  { key: "l2_error", label: "L2" },
  { key: "h1_error", label: "H1" },
  { key: "h2_error", label: "H2" },
];

/** Least-squares slope of log(err) against log(h). */
export function fitSlope(h: number[], err: number[]): number {
  if (h.length < 2) throw new Error("need at least two refinement rows");
  const lx = h.map(Math.log);
  const ly = err.map(Math.log);
  const mx = lx.reduce((a, b) => a + b, 0) / lx.length;
  const my = ly.reduce((a, b) => a + b, 0) / ly.length;
  let num = 0;
  let den = 0;
  for (let i = 0; i < lx.length; i++) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

export interface NamedReport {
  name: string;
  rows: ConvergenceRow[];
}

export function convergenceChart(reports: NamedReport[]): string {
  if (reports.length === 0) throw new Error("no convergence data given");
  const series: Series[] = [];
  const annotations: Annotation[] = [];
  let color = 0;
  for (const rep of reports) {
    const h = rep.rows.map((r) => r.h);
    for (const norm of NORMS) {
      const err = rep.rows.map((r) => r[norm.key]);
      const c = PALETTE[color++ % PALETTE.length];
      const slope = fitSlope(h, err);
      const prefix = reports.length > 1 ? `${rep.name} ` : "";
      series.push({
        x: h, y: err, color: c, markers: true,
        label: `${prefix}${norm.label} error`,
      });
      annotations.push({
        text: `${prefix}${norm.label}: fitted slope ${slope.toFixed(2)}`,
        color: c,
      });
    }
  }
  // slope guide lines h^1, h^2, h^4 anchored at the coarsest datum
  const allH = reports.flatMap((r) => r.rows.map((row) => row.h));
  const allE = reports.flatMap((r) => r.rows.map((row) => row.l2_error));
  const h0 = Math.max(...allH);
  const h1 = Math.min(...allH);
  const e0 = Math.max(...allE);
  for (const p of [1, 2, 4]) {
    series.push({
      x: [h0, h1],
      y: [e0, e0 * Math.pow(h1 / h0, p)],
      color: "#999",
      dash: "5,4",
      label: `slope ${p} guide`,
    });
  }
  return buildChart({
    title: "Convergence under mesh refinement",
    xLabel: "mesh size h",
    yLabel: "max error over time",
    logX: true,
    logY: true,
    series,
    annotations,
    height: 480,
  });
}

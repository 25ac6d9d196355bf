/**
 * Render solver CSVs as SVG charts.
 *
 * Usage:
 *   node dist/cli.js convergence out.svg study1.csv [study2.csv ...]
 *   node dist/cli.js energy out.svg run_N15.csv [run_N25.csv ...]
 *
 * Series are labeled by file stem (e.g. run_N25 -> "N25").
 */

import { readFileSync, writeFileSync } from "fs";
import path from "path";

import { convergenceChart } from "./convergence.js";
import { parseConvergenceCsv, parseDiagnosticsCsv } from "./csv.js";
import { energyChart } from "./energy.js";

export function seriesName(file: string): string {
  const stem = path.basename(file).replace(/\.csv$/i, "");
  const m = stem.match(/N\d+/);
  return m ? m[0] : stem;
}

export function runCli(argv: string[]): number {
  const [kind, out, ...inputs] = argv;
  if (!kind || !out || inputs.length === 0) {
    console.error("usage: cli.js <convergence|energy> <out.svg> <in.csv> [in.csv ...]");
    return 1;
  }
  try {
    let svg: string;
    if (kind === "convergence") {
      svg = convergenceChart(inputs.map((f) => ({
        name: seriesName(f),
        rows: parseConvergenceCsv(readFileSync(f, "utf-8")),
      })));
    } else if (kind === "energy") {
      svg = energyChart(inputs.map((f) => ({
        name: seriesName(f),
        rows: parseDiagnosticsCsv(readFileSync(f, "utf-8")),
      })));
    } else {
      console.error(`unknown plot kind '${kind}'`);
      return 1;
    }
    writeFileSync(out, svg);
    console.log(`SVG -> ${out}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(runCli(process.argv.slice(2)));
}

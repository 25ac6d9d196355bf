import { describe, expect, it } from "vitest";

import { convergenceChart, fitSlope } from "../src/convergence.js";
import { parseConvergenceCsv, parseDiagnosticsCsv } from "../src/csv.js";
import { energyChart } from "../src/energy.js";
import { seriesName } from "../src/cli.js";

/** Synthetic study with an exact slope-2 error column. */
function makeConvergenceCsv(slope = 2): string {
  const hs = [0.4, 0.2, 0.1, 0.05];
  const lines = ["size,dofs,h,l2_error,l2_eoc,h1_error,h1_eoc,h2_error,h2_eoc"];
  hs.forEach((h, i) => {
    const l2 = Math.pow(h, slope);
    const h1 = Math.pow(h, slope - 0.5);
    const h2 = Math.pow(h, slope - 1);
    const eoc = i === 0 ? "" : String(slope);
    const eoc1 = i === 0 ? "" : String(slope - 0.5);
    const eoc2 = i === 0 ? "" : String(slope - 1);
    lines.push(`${50 * 4 ** i},${121 * 4 ** i},${h},${l2},${eoc},${h1},${eoc1},${h2},${eoc2}`);
  });
  return lines.join("\n") + "\n";
}

function makeEnergyCsv(values: number[]): string {
  const lines = ["t,energy,mass,newton_iters"];
  values.forEach((e, i) => lines.push(`${i * 1e-3},${e},0.1,3`));
  return lines.join("\n") + "\n";
}

describe("csv parsing", () => {
  it("parses the convergence contract", () => {
    const rows = parseConvergenceCsv(makeConvergenceCsv());
    expect(rows).toHaveLength(4);
    expect(rows[0].l2_eoc).toBeNull();
    expect(rows[1].l2_eoc).toBe(2);
    expect(rows[3].dofs).toBe(121 * 64);
  });

  it("refuses a mismatched header", () => {
    const bad = makeConvergenceCsv().replace("l2_error", "error_l2");
    expect(() => parseConvergenceCsv(bad)).toThrow(/header/);
  });

  it("refuses an empty file", () => {
    expect(() => parseConvergenceCsv("")).toThrow(/empty/);
    expect(() => parseDiagnosticsCsv("\n\n")).toThrow(/empty/);
  });

  it("refuses a header-only diagnostics file", () => {
    expect(() => parseDiagnosticsCsv("t,energy,mass,newton_iters\n")).toThrow(/no data/);
  });

  it("names the offending column on bad numbers", () => {
    const bad = "t,energy,mass,newton_iters\n0.0,oops,0.1,3\n";
    expect(() => parseDiagnosticsCsv(bad)).toThrow(/energy/);
  });
});

describe("convergence chart", () => {
  it("annotates the fitted slope within 0.1 of the csv eoc", () => {
    const rows = parseConvergenceCsv(makeConvergenceCsv(2));
    const eoc = rows[rows.length - 1].l2_eoc!;
    const slope = fitSlope(rows.map((r) => r.h), rows.map((r) => r.l2_error));
    expect(Math.abs(slope - eoc)).toBeLessThan(0.1);
    const svg = convergenceChart([{ name: "criss", rows }]);
    const m = svg.match(/L2: fitted slope ([-\d.]+)/);
    expect(m).not.toBeNull();
    expect(Math.abs(Number(m![1]) - eoc)).toBeLessThan(0.1);
  });

  it("draws slope guides for orders 1, 2, 4", () => {
    const rows = parseConvergenceCsv(makeConvergenceCsv());
    const svg = convergenceChart([{ name: "a", rows }]);
    for (const p of [1, 2, 4]) expect(svg).toContain(`slope ${p} guide`);
  });

  it("overlays two studies with a legend per series", () => {
    const rows = parseConvergenceCsv(makeConvergenceCsv());
    const svg = convergenceChart([
      { name: "criss", rows },
      { name: "voronoi", rows },
    ]);
    expect(svg).toContain("criss L2 error");
    expect(svg).toContain("voronoi L2 error");
  });

  it("refuses an empty report list", () => {
    expect(() => convergenceChart([])).toThrow(/no convergence data/);
  });
});

describe("energy chart", () => {
  it("passes a monotone sequence through unchanged", () => {
    const rows = parseDiagnosticsCsv(makeEnergyCsv([3, 2.5, 2.2, 2.05, 2.0]));
    const svg = energyChart([{ name: "N15", rows }]);
    const polyline = svg.match(/<polyline points="([^"]+)"/)![1];
    const ys = polyline.split(" ").map((p) => Number(p.split(",")[1]));
    for (let i = 1; i < ys.length; i++) {
      expect(ys[i]).toBeGreaterThanOrEqual(ys[i - 1]); // svg y grows downward
    }
  });

  it("labels one series per grid csv", () => {
    const rows = parseDiagnosticsCsv(makeEnergyCsv([3, 2, 1]));
    const svg = energyChart([
      { name: "N15", rows },
      { name: "N25", rows },
      { name: "N45", rows },
    ]);
    for (const n of ["N15", "N25", "N45"]) expect(svg).toContain(`>${n}</text>`);
  });

  it("derives series names from file stems", () => {
    expect(seriesName("/tmp/run_N25.csv")).toBe("N25");
    expect(seriesName("study.csv")).toBe("study");
  });

  it("refuses an empty run list", () => {
    expect(() => energyChart([])).toThrow(/no diagnostics data/);
  });
});

describe("solver-produced fixtures", () => {
  const dir = new URL("./fixtures/", import.meta.url).pathname;

  it("renders the real convergence study with a close slope annotation", async () => {
    const { readFileSync } = await import("fs");
    const rows = parseConvergenceCsv(readFileSync(`${dir}convergence_criss.csv`, "utf-8"));
    const lastEoc = rows[rows.length - 1].l2_eoc!;
    const svg = convergenceChart([{ name: "criss", rows }]);
    const m = svg.match(/L2: fitted slope ([-\d.]+)/);
    expect(m).not.toBeNull();
    expect(Math.abs(Number(m![1]) - lastEoc)).toBeLessThan(0.1);
    expect(svg).toContain("slope 2 guide");
  });

  it("overlays the three grid-size energy runs", async () => {
    const { readFileSync } = await import("fs");
    const runs = [8, 12, 16].map((n) => ({
      name: `N${n}`,
      rows: parseDiagnosticsCsv(readFileSync(`${dir}energy_N${n}.csv`, "utf-8")),
    }));
    const svg = energyChart(runs);
    for (const n of [8, 12, 16]) expect(svg).toContain(`>N${n}</text>`);
    expect((svg.match(/<polyline/g) ?? []).length).toBe(3);
  });
});

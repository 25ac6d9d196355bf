/**
 * CSV readers for the solver's two output contracts:
 *
 *   convergence:  size,dofs,h,l2_error,l2_eoc,h1_error,h1_eoc,h2_error,h2_eoc
 *   diagnostics:  t,energy,mass,newton_iters
 *
 * Files with any other header are refused outright; silent column guessing
 * would defeat the point of a fixed contract.
 */

export const CONVERGENCE_HEADER = [
  "size", "dofs", "h",
  "l2_error", "l2_eoc",
  "h1_error", "h1_eoc",
  "h2_error", "h2_eoc",
] as const;

export const DIAGNOSTICS_HEADER = ["t", "energy", "mass", "newton_iters"] as const;

export interface ConvergenceRow {
  size: number;
  dofs: number;
  h: number;
  l2_error: number;
  l2_eoc: number | null;
  h1_error: number;
  h1_eoc: number | null;
  h2_error: number;
  h2_eoc: number | null;
}

export interface DiagnosticsRow {
  t: number;
  energy: number;
  mass: number;
  newton_iters: number;
}

function splitLines(text: string): string[] {
  return text.split(/\r?\n/).filter((line) => line.trim().length > 0);
}

function checkHeader(actual: string[], expected: readonly string[], kind: string): void {
  if (actual.length !== expected.length ||
      actual.some((name, i) => name.trim() !== expected[i])) {
    throw new Error(
      `not a ${kind} csv: header [${actual.join(",")}] does not match ` +
      `[${expected.join(",")}]`,
    );
  }
}

function num(field: string, line: number, name: string): number {
  const v = Number(field);
  if (field.trim() === "" || Number.isNaN(v)) {
    throw new Error(`line ${line}: column '${name}' is not a number: '${field}'`);
  }
  return v;
}

export function parseConvergenceCsv(text: string): ConvergenceRow[] {
  const lines = splitLines(text);
  if (lines.length === 0) throw new Error("empty csv");
  checkHeader(lines[0].split(","), CONVERGENCE_HEADER, "convergence");
  if (lines.length === 1) throw new Error("convergence csv has no data rows");
  return lines.slice(1).map((line, i) => {
    const f = line.split(",");
    if (f.length !== CONVERGENCE_HEADER.length) {
      throw new Error(`line ${i + 2}: expected ${CONVERGENCE_HEADER.length} fields`);
    }
    const eoc = (field: string): number | null =>
      field.trim() === "" ? null : num(field, i + 2, "eoc");
    return {
      size: num(f[0], i + 2, "size"),
      dofs: num(f[1], i + 2, "dofs"),
      h: num(f[2], i + 2, "h"),
      l2_error: num(f[3], i + 2, "l2_error"),
      l2_eoc: eoc(f[4]),
      h1_error: num(f[5], i + 2, "h1_error"),
      h1_eoc: eoc(f[6]),
      h2_error: num(f[7], i + 2, "h2_error"),
      h2_eoc: eoc(f[8]),
    };
  });
}

export function parseDiagnosticsCsv(text: string): DiagnosticsRow[] {
  const lines = splitLines(text);
  if (lines.length === 0) throw new Error("empty csv");
  checkHeader(lines[0].split(","), DIAGNOSTICS_HEADER, "diagnostics");
  if (lines.length === 1) throw new Error("diagnostics csv has no data rows");
  return lines.slice(1).map((line, i) => {
    const f = line.split(",");
    if (f.length !== DIAGNOSTICS_HEADER.length) {
      throw new Error(`line ${i + 2}: expected ${DIAGNOSTICS_HEADER.length} fields`);
    }
    return {
      t: num(f[0], i + 2, "t"),
      energy: num(f[1], i + 2, "energy"),
      mass: num(f[2], i + 2, "mass"),
      newton_iters: num(f[3], i + 2, "newton_iters"),
    };
  });
}

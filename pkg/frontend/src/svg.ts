/** Minimal hand-rolled SVG line charts (no DOM, no chart library). */

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label: string;
  dash?: string;
  markers?: boolean;
}

export interface Annotation {
  text: string;
  color: string;
}

export interface ChartOpts {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logX?: boolean;
  logY?: boolean;
  annotations?: Annotation[];
  width?: number;
  height?: number;
}

const MARGIN = { top: 44, right: 24, bottom: 52, left: 72 };

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / Math.max(1, n - 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((c) => c * mag);
  const step = candidates.find((c) => span / c <= n) ?? candidates[candidates.length - 1];
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) ticks.push(v);
  return ticks;
}

function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-12); Math.pow(10, e) <= hi * (1 + 1e-12); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks.length ? ticks : [lo, hi];
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(4)));
}

export function buildChart(opts: ChartOpts): string {
  const W = opts.width ?? 640;
  const H = opts.height ?? 440;
  const iw = W - MARGIN.left - MARGIN.right;
  const ih = H - MARGIN.top - MARGIN.bottom;

  const xs = opts.series.flatMap((s) => s.x);
  const ys = opts.series.flatMap((s) => s.y);
  if (xs.length === 0) throw new Error("nothing to plot");
  const tx = opts.logX ? Math.log10 : (v: number) => v;
  const ty = opts.logY ? Math.log10 : (v: number) => v;
  if (opts.logX && xs.some((v) => v <= 0)) throw new Error("log x-axis needs positive data");
  if (opts.logY && ys.some((v) => v <= 0)) throw new Error("log y-axis needs positive data");

  let xlo = Math.min(...xs), xhi = Math.max(...xs);
  let ylo = Math.min(...ys), yhi = Math.max(...ys);
  if (xlo === xhi) { xlo -= 0.5; xhi += 0.5; }
  if (ylo === yhi) { ylo -= 0.5 * Math.abs(ylo) || 0.5; yhi += 0.5 * Math.abs(yhi) || 0.5; }
  const padY = opts.logY ? Math.pow(yhi / ylo, 0.05) : 0.05 * (yhi - ylo);
  const padX = opts.logX ? Math.pow(xhi / xlo, 0.05) : 0.05 * (xhi - xlo);
  if (opts.logY) { ylo /= padY; yhi *= padY; } else { ylo -= padY; yhi += padY; }
  if (opts.logX) { xlo /= padX; xhi *= padX; } else { xlo -= padX; xhi += padX; }

  const px = (v: number) =>
    MARGIN.left + ((tx(v) - tx(xlo)) / (tx(xhi) - tx(xlo))) * iw;
  const py = (v: number) =>
    MARGIN.top + ih - ((ty(v) - ty(ylo)) / (ty(yhi) - ty(ylo))) * ih;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15" font-weight="bold">${esc(opts.title)}</text>`);

  const xticks = opts.logX ? decadeTicks(xlo, xhi) : niceTicks(xlo, xhi);
  const yticks = opts.logY ? decadeTicks(ylo, yhi) : niceTicks(ylo, yhi);
  for (const v of xticks) {
    const x = px(v);
    parts.push(`<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${MARGIN.top + ih}" stroke="#ddd"/>`);
    parts.push(`<text x="${x}" y="${MARGIN.top + ih + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">${fmt(v)}</text>`);
  }
  for (const v of yticks) {
    const y = py(v);
    parts.push(`<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + iw}" y2="${y}" stroke="#ddd"/>`);
    parts.push(`<text x="${MARGIN.left - 6}" y="${y + 4}" text-anchor="end" font-family="sans-serif" font-size="11">${fmt(v)}</text>`);
  }
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${iw}" height="${ih}" fill="none" stroke="#444"/>`);
  parts.push(`<text x="${MARGIN.left + iw / 2}" y="${H - 12}" text-anchor="middle" font-family="sans-serif" font-size="13">${esc(opts.xLabel)}</text>`);
  parts.push(`<text x="18" y="${MARGIN.top + ih / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 ${MARGIN.top + ih / 2})">${esc(opts.yLabel)}</text>`);

  for (const s of opts.series) {
    const pts = s.x.map((v, i) => `${px(v).toFixed(2)},${py(s.y[i]).toFixed(2)}`).join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(`<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.6"${dash}/>`);
    if (s.markers) {
      for (let i = 0; i < s.x.length; i++) {
        parts.push(`<circle cx="${px(s.x[i]).toFixed(2)}" cy="${py(s.y[i]).toFixed(2)}" r="3" fill="${s.color}"/>`);
      }
    }
  }

  // legend (top-left corner of the plot area)
  let ly = MARGIN.top + 14;
  for (const s of opts.series) {
    parts.push(`<line x1="${MARGIN.left + 10}" y1="${ly - 4}" x2="${MARGIN.left + 34}" y2="${ly - 4}" stroke="${s.color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`);
    parts.push(`<text x="${MARGIN.left + 40}" y="${ly}" font-family="sans-serif" font-size="11">${esc(s.label)}</text>`);
    ly += 16;
  }
  for (const a of opts.annotations ?? []) {
    parts.push(`<text x="${MARGIN.left + 10}" y="${ly}" font-family="sans-serif" font-size="11" fill="${a.color}">${esc(a.text)}</text>`);
    ly += 16;
  }
  parts.push("</svg>");
  return parts.join("\n");
}

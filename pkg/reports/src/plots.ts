/** The four figure kinds built from run logs: est/err convergence on log-log
 * axes with fitted slopes, effectivity-index tables, aspect-ratio statistics,
 * and PCG-iterations-per-DOF trends. */

import { InsufficientData, RunRow } from "./csv.js";
import { fitRate } from "./fit.js";
import { LinScale, LogScale, PALETTE, Svg, lbl } from "./svg.js";

export interface Series {
  label: string;
  rows: RunRow[];
}

export type Kind = "convergence" | "effectivity" | "ar_stats" | "pcg_ratio";

const W = 640;
const H = 440;
const M = { top: 30, right: 20, bottom: 50, left: 64 };

function requireRows(inputs: Series[], min: number, what: string): void {
  for (const s of inputs) {
    if (s.rows.length < min) {
      throw new InsufficientData(`${s.label}: ${s.rows.length} rows, ${what} needs ${min}`);
    }
  }
}

function logAxes(svg: Svg, xs: LogScale, ys: LogScale, xlab: string, ylab: string): void {
  svg.line(M.left, H - M.bottom, W - M.right, H - M.bottom);
  svg.line(M.left, M.top, M.left, H - M.bottom);
  for (const t of xs.ticks()) {
    const x = xs.pos(t);
    svg.line(x, H - M.bottom, x, H - M.bottom + 4);
    svg.line(x, M.top, x, H - M.bottom, "#ddd", 0.5);
    svg.text(x, H - M.bottom + 18, lbl(t), { anchor: "middle" });
  }
  for (const t of ys.ticks()) {
    const y = ys.pos(t);
    svg.line(M.left - 4, y, M.left, y);
    svg.line(M.left, y, W - M.right, y, "#ddd", 0.5);
    svg.text(M.left - 7, y + 4, lbl(t), { anchor: "end" });
  }
  svg.text((M.left + W - M.right) / 2, H - 12, xlab, { anchor: "middle", size: 13 });
  svg.text(16, (M.top + H - M.bottom) / 2, ylab, { anchor: "middle", size: 13, rotate: true });
}

export function renderConvergence(inputs: Series[], window = 5): string {
  requireRows(inputs, 2, "a convergence plot");
  const svg = new Svg(W, H);
  const allN = inputs.flatMap((s) => s.rows.map((r) => r.ndof));
  const allV = inputs.flatMap((s) =>
    s.rows.flatMap((r) => (r.err !== null && r.err > 0 ? [r.est, r.err] : [r.est])),
  );
  const xs = LogScale.fit(allN, M.left, W - M.right);
  const ys = LogScale.fit(allV, H - M.bottom, M.top);
  logAxes(svg, xs, ys, "NDOF", "estimator / energy error");
  inputs.forEach((s, i) => {
    const c = PALETTE[i % PALETTE.length];
    svg.polyline(
      s.rows.map((r) => [xs.pos(r.ndof), ys.pos(r.est)]),
      c,
    );
    for (const r of s.rows) svg.circle(xs.pos(r.ndof), ys.pos(r.est), 2.2, c);
    if (s.rows.every((r) => r.err !== null && r.err > 0)) {
      svg.polyline(
        s.rows.map((r) => [xs.pos(r.ndof), ys.pos(r.err as number)]),
        c,
        1.0,
        "4 3",
      );
    }
    let slope = "n/a";
    try {
      slope = fitRate(s.rows, window).toFixed(3);
    } catch (e) {
      if (!(e instanceof InsufficientData)) throw e;
    }
    const y = M.top + 16 + 16 * i;
    svg.line(W - M.right - 150, y - 4, W - M.right - 126, y - 4, c, 2);
    svg.text(W - M.right - 120, y, `${s.label}  slope ${slope}`);
  });
  return svg.render();
}

export function renderEffectivity(inputs: Series[]): string {
  requireRows(inputs, 1, "an effectivity table");
  const rows = Math.max(...inputs.map((s) => s.rows.length));
  const rowH = 17;
  const colW = 120;
  const headH = 56;
  const svg = new Svg(70 + colW * inputs.length, headH + rowH * (rows + 1) + 16);
  svg.text(12, 22, "Effectivity index per refinement step", { size: 13 });
  svg.text(12, headH + 12, "step", { size: 11 });
  inputs.forEach((s, i) => {
    svg.text(70 + colW * i + 8, headH - 6, s.label, { size: 11 });
    svg.text(70 + colW * i + 8, headH + 12, "ndof      eff", { size: 11 });
  });
  for (let r = 0; r < rows; r++) {
    const y = headH + rowH * (r + 1) + 12;
    svg.text(12, y, String(r + 1), { size: 11 });
    inputs.forEach((s, i) => {
      const row = s.rows[r];
      if (!row) return;
      const eff = row.eff === null ? "-" : row.eff.toFixed(4);
      svg.text(70 + colW * i + 8, y, `${row.ndof}  ${eff}`, { size: 11 });
    });
  }
  return svg.render();
}

export function renderArStats(inputs: Series[]): string {
  requireRows(inputs, 2, "an aspect-ratio plot");
  const svg = new Svg(W, H);
  const allS = inputs.flatMap((s) => s.rows.map((r) => r.step));
  const allA = inputs.flatMap((s) => s.rows.flatMap((r) => [r.ar_min, r.ar_mean, r.ar_max]));
  const xs = new LinScale(Math.min(...allS), Math.max(...allS), M.left, W - M.right);
  const ys = LinScale.fit(allA, H - M.bottom, M.top);
  svg.line(M.left, H - M.bottom, W - M.right, H - M.bottom);
  svg.line(M.left, M.top, M.left, H - M.bottom);
  for (const t of xs.ticks()) {
    svg.line(xs.pos(t), H - M.bottom, xs.pos(t), H - M.bottom + 4);
    svg.text(xs.pos(t), H - M.bottom + 18, lbl(t), { anchor: "middle" });
  }
  for (const t of ys.ticks()) {
    svg.line(M.left - 4, ys.pos(t), M.left, ys.pos(t));
    svg.line(M.left, ys.pos(t), W - M.right, ys.pos(t), "#ddd", 0.5);
    svg.text(M.left - 7, ys.pos(t) + 4, lbl(t), { anchor: "end" });
  }
  svg.text((M.left + W - M.right) / 2, H - 12, "refinement step", { anchor: "middle", size: 13 });
  svg.text(16, (M.top + H - M.bottom) / 2, "cell aspect ratio", { anchor: "middle", size: 13, rotate: true });
  inputs.forEach((s, i) => {
    const c = PALETTE[i % PALETTE.length];
    svg.polyline(s.rows.map((r) => [xs.pos(r.step), ys.pos(r.ar_mean)]), c);
    svg.polyline(s.rows.map((r) => [xs.pos(r.step), ys.pos(r.ar_min)]), c, 1, "2 3");
    svg.polyline(s.rows.map((r) => [xs.pos(r.step), ys.pos(r.ar_max)]), c, 1, "6 3");
    const y = M.top + 16 + 16 * i;
    svg.line(W - M.right - 150, y - 4, W - M.right - 126, y - 4, c, 2);
    svg.text(W - M.right - 120, y, `${s.label} (min/mean/max)`);
  });
  return svg.render();
}

export function renderPcgRatio(inputs: Series[]): string {
  requireRows(inputs, 2, "a PCG ratio plot");
  const svg = new Svg(W, H);
  const pos = inputs.flatMap((s) => s.rows.filter((r) => r.ndof > 0 && r.pcg_it > 0));
  if (pos.length === 0) throw new InsufficientData("no rows with positive PCG iteration counts");
  const xs = LogScale.fit(pos.map((r) => r.ndof), M.left, W - M.right);
  const ys = LogScale.fit(pos.map((r) => r.pcg_it / r.ndof), H - M.bottom, M.top);
  logAxes(svg, xs, ys, "NDOF", "PCG iterations / NDOF");
  inputs.forEach((s, i) => {
    const c = PALETTE[i % PALETTE.length];
    const pts = s.rows.filter((r) => r.ndof > 0 && r.pcg_it > 0);
    svg.polyline(pts.map((r) => [xs.pos(r.ndof), ys.pos(r.pcg_it / r.ndof)]), c);
    for (const r of pts) svg.circle(xs.pos(r.ndof), ys.pos(r.pcg_it / r.ndof), 2.2, c);
    const y = M.top + 16 + 16 * i;
    svg.line(W - M.right - 150, y - 4, W - M.right - 126, y - 4, c, 2);
    svg.text(W - M.right - 120, y, s.label);
  });
  return svg.render();
}

export function render(kind: Kind, inputs: Series[], window = 5): string {
  switch (kind) {
    case "convergence":
      return renderConvergence(inputs, window);
    case "effectivity":
      return renderEffectivity(inputs);
    case "ar_stats":
      return renderArStats(inputs);
    case "pcg_ratio":
      return renderPcgRatio(inputs);
  }
}

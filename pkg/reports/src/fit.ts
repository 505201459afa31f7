/** Convergence-rate fit: least-squares slope of log(quantity) vs log(NDOF)
 * over the last `window` rows — the same definition the solver CLI prints,
 * so figure annotations and solver output agree digit-for-digit. */

import { InsufficientData, RunRow } from "./csv.js";

export type Quantity = "est" | "err";

export function fitRate(rows: RunRow[], window = 5, quantity: Quantity = "est"): number {
  if (rows.length < window) {
    throw new InsufficientData(`${rows.length} rows, need ${window}`);
  }
  const tail = rows.slice(rows.length - window);
  const xs: number[] = [];
  const ys: number[] = [];
  for (const r of tail) {
    const v = quantity === "est" ? r.est : r.err;
    if (v === null || v <= 0 || r.ndof <= 0) {
      throw new InsufficientData("non-positive or missing values in fit window");
    }
    xs.push(Math.log(r.ndof));
    ys.push(Math.log(v));
  }
  const n = xs.length;
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx === 0) throw new InsufficientData("degenerate fit window (constant NDOF)");
  return sxy / sxx;
}

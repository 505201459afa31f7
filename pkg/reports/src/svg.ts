/** Minimal deterministic SVG builder: no timestamps, no randomness, fixed
 * number formatting, so identical input always yields identical bytes. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

/** Fixed-precision coordinate formatting (avoids platform float noise). */
export function px(v: number): string {
  return v.toFixed(2);
}

/** Short human label for tick values and legends. */
export function lbl(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(0).replace("e+", "e");
  }
  return String(parseFloat(v.toPrecision(4)));
}

export class LogScale {
  constructor(
    readonly lo: number,
    readonly hi: number,
    readonly a: number,
    readonly b: number,
  ) {}

  static fit(values: number[], a: number, b: number): LogScale {
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    return new LogScale(lo, hi <= lo ? lo * 10 : hi, a, b);
  }

  pos(v: number): number {
    const t = (Math.log10(v) - Math.log10(this.lo)) / (Math.log10(this.hi) - Math.log10(this.lo));
    return this.a + t * (this.b - this.a);
  }

  /** Decade ticks covering the data range. */
  ticks(): number[] {
    const out: number[] = [];
    for (let e = Math.ceil(Math.log10(this.lo) - 1e-9); e <= Math.floor(Math.log10(this.hi) + 1e-9); e++) {
      out.push(10 ** e);
    }
    if (out.length === 0) out.push(10 ** Math.round(Math.log10(this.lo)));
    return out;
  }
}

export class LinScale {
  constructor(
    readonly lo: number,
    readonly hi: number,
    readonly a: number,
    readonly b: number,
  ) {}

  static fit(values: number[], a: number, b: number): LinScale {
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    return new LinScale(lo, hi <= lo ? lo + 1 : hi, a, b);
  }

  pos(v: number): number {
    const t = (v - this.lo) / (this.hi - this.lo);
    return this.a + t * (this.b - this.a);
  }

  ticks(n = 6): number[] {
    const span = this.hi - this.lo;
    const step = 10 ** Math.floor(Math.log10(span / n));
    const mult = span / n / step >= 5 ? 5 : span / n / step >= 2 ? 2 : 1;
    const s = step * mult;
    const out: number[] = [];
    for (let v = Math.ceil(this.lo / s) * s; v <= this.hi + 1e-12 * span; v += s) {
      out.push(parseFloat(v.toPrecision(12)));
    }
    return out;
  }
}

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica,Arial,sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#000", w = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${px(x1)}" y1="${px(y1)}" x2="${px(x2)}" y2="${px(y2)}" stroke="${stroke}" stroke-width="${w}"${d}/>`,
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, w = 1.5, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    const s = pts.map(([x, y]) => `${px(x)},${px(y)}`).join(" ");
    this.parts.push(`<polyline points="${s}" fill="none" stroke="${stroke}" stroke-width="${w}"${d}/>`);
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${px(x)}" cy="${px(y)}" r="${r}" fill="${fill}"/>`);
  }

  text(x: number, y: number, s: string, opts: { size?: number; anchor?: string; rotate?: boolean } = {}): void {
    const size = opts.size ?? 11;
    const anchor = opts.anchor ?? "start";
    const tr = opts.rotate ? ` transform="rotate(-90 ${px(x)} ${px(y)})"` : "";
    this.parts.push(
      `<text x="${px(x)}" y="${px(y)}" font-size="${size}" text-anchor="${anchor}"${tr}>${escapeXml(s)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

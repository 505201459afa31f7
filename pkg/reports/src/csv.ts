/** Parser for the adaptive-run CSV log (fixed schema, see the solver CLI). */

export const CSV_COLUMNS = [
  "step",
  "ncell",
  "ndof",
  "est",
  "err",
  "eff",
  "pcg_it",
  "ar_min",
  "ar_mean",
  "ar_max",
  "wall_ms",
] as const;

export interface RunRow {
  step: number;
  ncell: number;
  ndof: number;
  est: number;
  err: number | null;
  eff: number | null;
  pcg_it: number;
  ar_min: number;
  ar_mean: number;
  ar_max: number;
  wall_ms: number | null;
}

export class SchemaError extends Error {}
export class InsufficientData extends Error {}

function num(field: string, line: number): number {
  const v = Number(field);
  if (field === "" || !Number.isFinite(v)) {
    throw new SchemaError(`line ${line}: bad numeric field "${field}"`);
  }
  return v;
}

function optional(field: string, line: number): number | null {
  return field === "" ? null : num(field, line);
}

export function parseRunLog(text: string): RunRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError("empty file");
  if (lines[0] !== CSV_COLUMNS.join(",")) {
    throw new SchemaError(`unexpected header: ${lines[0]}`);
  }
  const rows: RunRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const f = lines[i].split(",");
    if (f.length !== CSV_COLUMNS.length) {
      throw new SchemaError(`line ${i + 1}: expected ${CSV_COLUMNS.length} fields`);
    }
    rows.push({
      step: num(f[0], i + 1),
      ncell: num(f[1], i + 1),
      ndof: num(f[2], i + 1),
      est: num(f[3], i + 1),
      err: optional(f[4], i + 1),
      eff: optional(f[5], i + 1),
      pcg_it: num(f[6], i + 1),
      ar_min: num(f[7], i + 1),
      ar_mean: num(f[8], i + 1),
      ar_max: num(f[9], i + 1),
      wall_ms: optional(f[10], i + 1),
    });
  }
  return rows;
}

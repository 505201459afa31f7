/** dfnvem-report --kind convergence --csv a.csv b.csv --out fig.svg
 *
 * Reads run-log CSVs produced by the solver CLI and writes one SVG figure.
 * Exit code 0 on success, 1 on any error (bad schema, too little data). */

import { readFileSync, writeFileSync } from "node:fs";
import { basename, dirname } from "node:path";
import { parseArgs } from "node:util";

import { parseRunLog } from "./csv.js";
import { fitRate } from "./fit.js";
import { Kind, Series, render } from "./plots.js";

const KINDS: Kind[] = ["convergence", "effectivity", "ar_stats", "pcg_ratio"];

export function seriesLabel(path: string): string {
  const base = basename(path);
  // every run writes "runlog.csv": the run directory is the telling name
  return base === "runlog.csv" ? basename(dirname(path)) : base.replace(/\.csv$/, "");
}

export function main(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      kind: { type: "string" },
      csv: { type: "string", multiple: true },
      out: { type: "string" },
      window: { type: "string", default: "5" },
    },
  });
  const kind = values.kind as Kind | undefined;
  if (!kind || !KINDS.includes(kind)) {
    console.error(`--kind must be one of ${KINDS.join(", ")}`);
    return 1;
  }
  if (!values.csv?.length || !values.out) {
    console.error("--csv <files...> and --out <file.svg> are required");
    return 1;
  }
  try {
    const inputs: Series[] = values.csv.map((p) => ({
      label: seriesLabel(p),
      rows: parseRunLog(readFileSync(p, "utf8")),
    }));
    writeFileSync(values.out, render(kind, inputs, Number(values.window)));
    if (kind === "convergence") {
      for (const s of inputs) {
        try {
          console.log(`${s.label}: slope ${fitRate(s.rows, Number(values.window))}`);
        } catch {
          console.log(`${s.label}: slope n/a`);
        }
      }
    }
    return 0;
  } catch (e) {
    console.error(`error: ${e instanceof Error ? e.message : e}`);
    return 1;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}

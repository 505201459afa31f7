import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { main, seriesLabel } from "../src/cli.js";
import { CSV_COLUMNS, InsufficientData, parseRunLog } from "../src/csv.js";
import { Series, render, renderConvergence } from "../src/plots.js";

const FIX = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

function series(name: string): Series {
  return {
    label: name,
    rows: parseRunLog(readFileSync(join(FIX, name, "runlog.csv"), "utf8")),
  };
}

describe("figures", () => {
  const inputs = [series("p1_k1_maxmom"), series("p1_k2_maxmom")];

  it("renders every kind to valid standalone SVG", () => {
    for (const kind of ["convergence", "effectivity", "ar_stats", "pcg_ratio"] as const) {
      const svg = render(kind, inputs);
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
      expect(svg).not.toMatch(/NaN|Infinity/);
    }
  });

  it("is deterministic: identical input, identical bytes", () => {
    for (const kind of ["convergence", "effectivity", "ar_stats", "pcg_ratio"] as const) {
      expect(render(kind, inputs)).toBe(render(kind, inputs));
    }
  });

  it("annotates convergence curves with the fitted slope", () => {
    const svg = renderConvergence([series("p1_k2_maxmom")]);
    expect(svg).toContain("slope -1.013");
  });

  it("refuses a single-row CSV for convergence", () => {
    const one = {
      label: "one",
      rows: parseRunLog(CSV_COLUMNS.join(",") + "\n1,4,11,1.5,,,0,1,1,1,\n"),
    };
    expect(() => renderConvergence([one])).toThrow(InsufficientData);
  });
});

describe("cli", () => {
  it("writes a figure and prints slopes", () => {
    const dir = mkdtempSync(join(tmpdir(), "rep-"));
    const out = join(dir, "fig.svg");
    const rc = main([
      "--kind", "convergence",
      "--csv", join(FIX, "p1_k1_maxmom", "runlog.csv"),
      "--csv", join(FIX, "p1_k2_maxmom", "runlog.csv"),
      "--out", out,
    ]);
    expect(rc).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("</svg>");
  });

  it("labels series by run directory when files are all runlog.csv", () => {
    expect(seriesLabel("/x/p1_k1_maxmom/runlog.csv")).toBe("p1_k1_maxmom");
    expect(seriesLabel("/x/custom_name.csv")).toBe("custom_name");
  });

  it("fails cleanly on a single-row input", () => {
    const dir = mkdtempSync(join(tmpdir(), "rep-"));
    const bad = join(dir, "one.csv");
    writeFileSync(bad, CSV_COLUMNS.join(",") + "\n1,4,11,1.5,,,0,1,1,1,\n");
    const rc = main(["--kind", "convergence", "--csv", bad, "--out", join(dir, "f.svg")]);
    expect(rc).toBe(1);
  });

  it("rejects unknown kinds", () => {
    expect(main(["--kind", "sparkline", "--csv", "x.csv", "--out", "y.svg"])).toBe(1);
  });
});

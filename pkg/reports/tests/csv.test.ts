import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { CSV_COLUMNS, InsufficientData, SchemaError, parseRunLog } from "../src/csv.js";

const FIX = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

function golden(name: string): string {
  return readFileSync(join(FIX, name, "runlog.csv"), "utf8");
}

describe("parseRunLog", () => {
  it("parses a golden run log", () => {
    const rows = parseRunLog(golden("p1_k2_maxmom"));
    expect(rows.length).toBeGreaterThan(5);
    expect(rows[0].step).toBe(1);
    expect(rows[0].ncell).toBe(4);
    for (let i = 1; i < rows.length; i++) {
      expect(rows[i].ndof).toBeGreaterThanOrEqual(rows[i - 1].ndof);
      expect(rows[i].step).toBe(rows[i - 1].step + 1);
    }
  });

  it("keeps blank optional fields as null", () => {
    const text =
      CSV_COLUMNS.join(",") + "\n" + "1,4,11,1.5,,,0,1.1,1.2,1.3,\n";
    const rows = parseRunLog(text);
    expect(rows[0].err).toBeNull();
    expect(rows[0].eff).toBeNull();
    expect(rows[0].wall_ms).toBeNull();
    expect(rows[0].est).toBe(1.5);
  });

  it("rejects a wrong header", () => {
    expect(() => parseRunLog("a,b,c\n1,2,3\n")).toThrow(SchemaError);
  });

  it("rejects short rows and bad numbers", () => {
    const head = CSV_COLUMNS.join(",") + "\n";
    expect(() => parseRunLog(head + "1,2,3\n")).toThrow(SchemaError);
    expect(() => parseRunLog(head + "x,4,11,1.5,,,0,1,1,1,\n")).toThrow(SchemaError);
  });

  it("exports the error type used for refusals", () => {
    expect(new InsufficientData("x")).toBeInstanceOf(Error);
  });
});

import { describe, expect, it } from "vitest";
import * as fs from "node:fs";
import * as path from "node:path";

import {
  SchemaError,
  readCoefficients,
  readDiagnostics,
  readManifold,
  readMargins,
} from "../src/csv.js";

const FIXTURES = path.join(__dirname, "..", "fixtures");
const load = (name: string) =>
  fs.readFileSync(path.join(FIXTURES, name), "utf-8");

describe("diagnostics schema", () => {
  it("parses the golden file and infers the dimension", () => {
    const diag = readDiagnostics(load("diagnostics.csv"));
    expect(diag.dim).toBe(2);
    expect(diag.t[0]).toBe(0);
    expect(diag.columns.has("sup_force")).toBe(true);
    expect(diag.columns.get("mass")!.every((v) => v > 0)).toBe(true);
  });

  it("names the missing column", () => {
    const broken = load("diagnostics.csv").replace("sup_force", "sup_f");
    expect(() => readDiagnostics(broken)).toThrowError(SchemaError);
    expect(() => readDiagnostics(broken)).toThrow(/'sup_force'/);
  });

  it("rejects ragged rows", () => {
    const text = "t,sup_force,weighted_sup_rho,mass,E_U1\n0,1,2\n";
    expect(() => readDiagnostics(text)).toThrowError(SchemaError);
  });
});

describe("manifold schema", () => {
  it("parses the golden file", () => {
    const man = readManifold(load("manifold.csv"));
    expect(man.dim).toBe(2);
    expect(man.x.length).toBe(81);
    expect(man.iters.every((v) => v >= 1)).toBe(true);
  });

  it("names an out-of-order column", () => {
    const lines = load("manifold.csv").split("\n");
    lines[0] = "x1,x2,v1,v2,defect,phi1,phi2,iters";
    expect(() => readManifold(lines.join("\n"))).toThrow(/'defect'/);
  });
});

describe("coefficients and margins", () => {
  it("parses the golden coefficients", () => {
    const rows = readCoefficients(load("coefficients.csv"));
    expect(rows.length).toBeGreaterThan(0);
    const fields = new Set(rows.map((r) => r.baseField));
    expect(fields).toEqual(new Set(["U1", "U2", "L", "R12"]));
  });

  it("parses margins", () => {
    const margins = readMargins(load("margins.csv"));
    for (const name of ["b2", "b3", "b4", "eps"]) {
      expect(margins.has(name)).toBe(true);
    }
  });
});

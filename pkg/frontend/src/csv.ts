/** Strict CSV readers for the solver's diagnostic artifacts.
 *
 * Schemas are validated against the headers the solver writes; a mismatch
 * reports the offending column by name so broken pipelines fail loudly.
 */

export class SchemaError extends Error {
  readonly column: string;
  constructor(file: string, column: string, detail: string) {
    super(`${file}: column '${column}': ${detail}`);
    this.column = column;
  }
}

export interface CsvTable {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string, file: string): CsvTable {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(file, "<header>", "empty file");
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new SchemaError(
        file,
        header[Math.min(cells.length, header.length) - 1] ?? "<row>",
        `row ${i + 2} has ${cells.length} cells, expected ${header.length}`,
      );
    }
    return cells;
  });
  return { header, rows };
}

function numericColumn(table: CsvTable, name: string, file: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(file, name, "missing");
  }
  return table.rows.map((row, i) => {
    const value = Number(row[idx]);
    if (Number.isNaN(value) && row[idx].toLowerCase() !== "nan") {
      throw new SchemaError(file, name, `non-numeric value '${row[idx]}' in row ${i + 2}`);
    }
    return value;
  });
}

export interface Diagnostics {
  t: number[];
  columns: Map<string, number[]>;
  /** spatial dimension, inferred from the energy column set */
  dim: number;
}

export function readDiagnostics(text: string, file = "diagnostics.csv"): Diagnostics {
  const table = parseCsv(text, file);
  for (const required of ["t", "sup_force", "weighted_sup_rho", "mass"]) {
    if (!table.header.includes(required)) {
      throw new SchemaError(file, required, "missing");
    }
  }
  if (table.header[0] !== "t") {
    throw new SchemaError(file, table.header[0], "first column must be 't'");
  }
  const columns = new Map<string, number[]>();
  for (const name of table.header.slice(1)) {
    columns.set(name, numericColumn(table, name, file));
  }
  if (![...columns.keys()].some((name) => name.startsWith("E_"))) {
    throw new SchemaError(file, "E_*", "no energy surrogate columns");
  }
  const dim = columns.has("E_U3") ? 3 : 2;
  return { t: numericColumn(table, "t", file), columns, dim };
}

export interface Manifold {
  dim: number;
  x: number[][];
  v: number[][];
  phi: number[][];
  defect: number[];
  iters: number[];
}

export function readManifold(text: string, file = "manifold.csv"): Manifold {
  const table = parseCsv(text, file);
  const dim = table.header.filter((h) => /^x\d+$/.test(h)).length;
  if (dim < 2 || dim > 3) {
    throw new SchemaError(file, "x1", `expected x1..xn columns, found ${dim}`);
  }
  const want = [
    ...range(dim).map((i) => `x${i + 1}`),
    ...range(dim).map((i) => `v${i + 1}`),
    ...range(dim).map((i) => `phi${i + 1}`),
    "defect",
    "iters",
  ];
  for (const [i, name] of want.entries()) {
    if (table.header[i] !== name) {
      throw new SchemaError(file, table.header[i] ?? name, `expected '${name}' at position ${i}`);
    }
  }
  const cols = new Map(want.map((n) => [n, numericColumn(table, n, file)]));
  const pick = (prefix: string) =>
    table.rows.map((_, r) => range(dim).map((i) => cols.get(`${prefix}${i + 1}`)![r]));
  return {
    dim,
    x: pick("x"),
    v: pick("v"),
    phi: pick("phi"),
    defect: cols.get("defect")!,
    iters: cols.get("iters")!,
  };
}

export interface CoefficientRow {
  t: number;
  particleId: number;
  baseField: string;
  k: number;
  phi: number;
}

export function readCoefficients(text: string, file = "coefficients.csv"): CoefficientRow[] {
  const table = parseCsv(text, file);
  const want = ["t", "particle_id", "base_field", "k", "phi_value"];
  for (const [i, name] of want.entries()) {
    if (table.header[i] !== name) {
      throw new SchemaError(file, table.header[i] ?? name, `expected '${name}' at position ${i}`);
    }
  }
  return table.rows.map((row) => ({
    t: Number(row[0]),
    particleId: Number(row[1]),
    baseField: row[2],
    k: Number(row[3]),
    phi: Number(row[4]),
  }));
}

export function readMargins(text: string, file = "margins.csv"): Map<string, number> {
  const table = parseCsv(text, file);
  if (table.header[0] !== "name" || table.header[1] !== "value") {
    throw new SchemaError(file, table.header[0], "expected 'name,value' header");
  }
  return new Map(table.rows.map((row) => [row[0], Number(row[1])]));
}

function range(n: number): number[] {
  return Array.from({ length: n }, (_, i) => i);
}

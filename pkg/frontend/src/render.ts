/** Turn the solver's CSV artifacts into SVG figures and a text summary.
 *
 * Fits are recomputed here from the files, never read from the solver, so
 * the plots double as an independent cross-check of the reported slopes.
 * Rendering is read-only and deterministic.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { barChart, linePlot, scatterPlot, type Series } from "./charts.js";
import {
  readCoefficients,
  readDiagnostics,
  readManifold,
  readMargins,
} from "./csv.js";
import { defaultWindow, logLinearFit } from "./fit.js";

export interface RenderResult {
  written: string[];
  summary: string[];
  slopes: Map<string, number>;
}

const LOG10 = Math.log(10);

function log10(values: number[]): number[] {
  return values.map((v) => (v > 0 ? Math.log(v) / LOG10 : NaN));
}

function referenceLine(
  t: number[],
  anchorT: number,
  anchorLog10: number,
  slopeNatural: number,
): number[] {
  // slope is in natural-log units per time; convert for the log10 axis
  return t.map((v) => anchorLog10 + (slopeNatural / LOG10) * (v - anchorT));
}

export function renderReports(inDir: string, outDir: string): RenderResult {
  const have = (name: string) => fs.existsSync(path.join(inDir, name));
  const read = (name: string) => fs.readFileSync(path.join(inDir, name), "utf-8");
  const present = ["diagnostics.csv", "manifold.csv", "coefficients.csv"].filter(have);
  if (present.length === 0) {
    throw new Error(
      `no inputs in ${inDir}: need at least one of diagnostics.csv, manifold.csv, coefficients.csv`,
    );
  }
  fs.mkdirSync(outDir, { recursive: true });

  const written: string[] = [];
  const summary: string[] = [];
  const slopes = new Map<string, number>();
  const emit = (name: string, content: string) => {
    fs.writeFileSync(path.join(outDir, name), content);
    written.push(name);
  };

  if (have("diagnostics.csv")) {
    const diag = readDiagnostics(read("diagnostics.csv"));
    const window = defaultWindow(diag.t);
    for (const name of ["sup_force", "weighted_sup_rho"] as const) {
      const values = diag.columns.get(name)!;
      const fit = logLinearFit(diag.t, values, window);
      slopes.set(name, fit.slope);
      summary.push(
        `${name} fitted slope: ${fit.slope.toFixed(5)} +- ${fit.stderr.toFixed(5)} ` +
          `on [${window[0].toFixed(2)}, ${window[1].toFixed(2)}]`,
      );
      const y = log10(values);
      const anchorIdx = diag.t.findIndex((v) => v >= window[0]);
      const series: Series[] = [
        { x: diag.t, y, label: name, color: "#1762a8", markers: true },
      ];
      if (name === "sup_force") {
        for (const [slope, label, color] of [
          [-(diag.dim - 1), `reference slope -(n-1) = ${-(diag.dim - 1)}`, "#b33"],
          [-diag.dim, `reference slope -n = ${-diag.dim}`, "#3a3"],
        ] as Array<[number, string, string]>) {
          series.push({
            x: diag.t,
            y: referenceLine(diag.t, diag.t[anchorIdx], y[anchorIdx], slope),
            label,
            color,
            dashed: true,
          });
        }
      }
      emit(
        `decay_${name}.svg`,
        linePlot({
          title: `${name} decay (n = ${diag.dim})`,
          xlabel: "t",
          ylabel: `log10 ${name}`,
          series,
          annotations: [`fitted slope: ${fit.slope.toFixed(2)}`],
        }),
      );
    }
  }

  if (have("manifold.csv")) {
    const man = readManifold(read("manifold.csv"));
    const radius = man.x.map((row) => Math.hypot(...row));
    const offset = man.x.map((row, i) =>
      Math.hypot(...row.map((v, a) => v + man.v[i][a])),
    );
    const supOffset = Math.max(...offset.filter(Number.isFinite));
    let band = { upper: supOffset, label: `measured sup |x+v| = ${supOffset.toPrecision(3)}` };
    if (have("margins.csv")) {
      const eps = readMargins(read("margins.csv")).get("eps");
      if (eps !== undefined) {
        band = { upper: eps, label: `eps band (eps = ${eps})` };
      }
    }
    summary.push(
      `manifold: ${man.x.length} samples, sup |x+v| = ${supOffset.toPrecision(6)}, ` +
        `max defect ${Math.max(...man.defect.filter(Number.isFinite)).toPrecision(3)}`,
    );
    emit(
      "manifold.svg",
      scatterPlot({
        title: "trapped-set samples vs the linear plane v = -x",
        xlabel: "|x|",
        ylabel: "|x + v|",
        x: radius,
        y: offset,
        band,
        annotations: [`${man.x.length} samples`],
      }),
    );
  }

  if (have("coefficients.csv")) {
    const rows = readCoefficients(read("coefficients.csv"));
    const channels = new Map<string, Map<number, number>>();
    for (const row of rows) {
      const key = `${row.baseField},k=${row.k}`;
      let byT = channels.get(key);
      if (!byT) {
        byT = new Map();
        channels.set(key, byT);
      }
      byT.set(row.t, Math.max(byT.get(row.t) ?? 0, Math.abs(row.phi)));
    }
    const growth = [...channels.entries()].map(([key, byT]) => {
      const stat = Math.max(
        ...[...byT.entries()].map(([t, v]) => v / (1 + t)),
      );
      return { label: key, value: stat };
    });
    summary.push(
      `coefficients: ${channels.size} channels, ` +
        `max |phi|/(1+t) = ${Math.max(...growth.map((g) => g.value)).toPrecision(4)}`,
    );
    emit(
      "coefficient_growth.svg",
      barChart({
        title: "modified-coefficient growth statistic",
        ylabel: "max |phi| / (1 + t)",
        bars: growth,
      }),
    );
    if (have("margins.csv")) {
      const margins = readMargins(read("margins.csv"));
      const bars = ["b2", "b3", "b4"]
        .filter((name) => margins.has(name))
        .map((name) => ({ label: name.toUpperCase(), value: margins.get(name)! }));
      summary.push(
        "bootstrap margins: " +
          bars.map((b) => `${b.label}=${b.value.toPrecision(3)}`).join(", ") +
          " (pass when < 1)",
      );
      emit(
        "bootstrap_margins.svg",
        barChart({
          title: "bootstrap margins (pass below the guide)",
          ylabel: "margin",
          bars,
          guide: { value: 1.0, label: "bound" },
        }),
      );
    }
  }

  emit("summary.txt", summary.join("\n") + "\n");
  return { written, summary, slopes };
}

/** Minimal deterministic SVG charts: fixed styles, no timestamps, values
 * formatted with fixed precision so identical inputs give identical bytes. */

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 70, right: 20, top: 40, bottom: 50 };

export interface Series {
  x: number[];
  y: number[];
  label: string;
  color: string;
  dashed?: boolean;
  markers?: boolean;
}

function fmt(v: number): string {
  return Number.isFinite(v) ? v.toPrecision(8) : "0";
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / count / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    ticks.push(v);
  }
  return ticks;
}

export function linePlot(opts: {
  title: string;
  xlabel: string;
  ylabel: string;
  series: Series[];
  annotations?: string[];
}): string {
  const xs = opts.series.flatMap((s) => s.x);
  const ys = opts.series.flatMap((s) => s.y).filter((v) => Number.isFinite(v));
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const y0 = Math.min(...ys);
  const y1 = Math.max(...ys);
  const padY = (y1 - y0 || 1) * 0.08;
  const sx = (v: number) =>
    MARGIN.left + ((v - x0) / (x1 - x0 || 1)) * (WIDTH - MARGIN.left - MARGIN.right);
  const sy = (v: number) =>
    HEIGHT - MARGIN.bottom -
    ((v - (y0 - padY)) / (y1 - y0 + 2 * padY || 1)) *
      (HEIGHT - MARGIN.top - MARGIN.bottom);

  const parts: string[] = [];
  parts.push(axisFrame(opts.title, opts.xlabel, opts.ylabel));
  for (const tx of niceTicks(x0, x1)) {
    parts.push(
      `<line x1="${fmt(sx(tx))}" y1="${HEIGHT - MARGIN.bottom}" x2="${fmt(sx(tx))}" y2="${HEIGHT - MARGIN.bottom + 5}" stroke="#333"/>`,
      `<text x="${fmt(sx(tx))}" y="${HEIGHT - MARGIN.bottom + 18}" font-size="11" text-anchor="middle">${fmt(tx).replace(/\.?0+$/, "")}</text>`,
    );
  }
  for (const ty of niceTicks(y0 - padY, y1 + padY)) {
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${fmt(sy(ty))}" x2="${MARGIN.left}" y2="${fmt(sy(ty))}" stroke="#333"/>`,
      `<text x="${MARGIN.left - 8}" y="${fmt(sy(ty) + 4)}" font-size="11" text-anchor="end">${fmt(ty).replace(/\.?0+$/, "")}</text>`,
    );
  }
  let legendY = MARGIN.top + 8;
  for (const s of opts.series) {
    const pts = s.x
      .map((v, i) => [v, s.y[i]] as const)
      .filter(([, yv]) => Number.isFinite(yv));
    const path = pts.map(([xv, yv]) => `${fmt(sx(xv))},${fmt(sy(yv))}`).join(" ");
    const dash = s.dashed ? ' stroke-dasharray="6 4"' : "";
    parts.push(
      `<polyline fill="none" stroke="${s.color}" stroke-width="1.6"${dash} points="${path}"/>`,
    );
    if (s.markers) {
      for (const [xv, yv] of pts) {
        parts.push(
          `<circle cx="${fmt(sx(xv))}" cy="${fmt(sy(yv))}" r="2.4" fill="${s.color}"/>`,
        );
      }
    }
    parts.push(
      `<text x="${WIDTH - MARGIN.right - 6}" y="${legendY}" font-size="11" text-anchor="end" fill="${s.color}">${s.label}</text>`,
    );
    legendY += 14;
  }
  for (const [i, note] of (opts.annotations ?? []).entries()) {
    parts.push(
      `<text x="${MARGIN.left + 10}" y="${MARGIN.top + 10 + 14 * i}" font-size="12" fill="#222">${note}</text>`,
    );
  }
  return svgDocument(parts.join("\n"));
}

export function scatterPlot(opts: {
  title: string;
  xlabel: string;
  ylabel: string;
  x: number[];
  y: number[];
  band?: { upper: number; label: string };
  annotations?: string[];
}): string {
  const finite = opts.x.map((v, i) => [v, opts.y[i]] as const).filter(
    ([a, b]) => Number.isFinite(a) && Number.isFinite(b),
  );
  const x0 = 0;
  const x1 = Math.max(...finite.map(([a]) => a), 1e-12);
  const yMax = Math.max(...finite.map(([, b]) => b), opts.band?.upper ?? 0, 1e-12);
  const sx = (v: number) =>
    MARGIN.left + (v / x1) * (WIDTH - MARGIN.left - MARGIN.right);
  const sy = (v: number) =>
    HEIGHT - MARGIN.bottom - (v / (yMax * 1.15)) * (HEIGHT - MARGIN.top - MARGIN.bottom);
  const parts: string[] = [axisFrame(opts.title, opts.xlabel, opts.ylabel)];
  if (opts.band) {
    parts.push(
      `<rect x="${MARGIN.left}" y="${fmt(sy(opts.band.upper))}" width="${WIDTH - MARGIN.left - MARGIN.right}" height="${fmt(sy(0) - sy(opts.band.upper))}" fill="#cfe8ff" opacity="0.6"/>`,
      `<text x="${WIDTH - MARGIN.right - 6}" y="${fmt(sy(opts.band.upper) - 4)}" font-size="11" text-anchor="end" fill="#1762a8">${opts.band.label}</text>`,
    );
  }
  for (const tx of niceTicks(x0, x1)) {
    parts.push(
      `<text x="${fmt(sx(tx))}" y="${HEIGHT - MARGIN.bottom + 18}" font-size="11" text-anchor="middle">${fmt(tx).replace(/\.?0+$/, "")}</text>`,
    );
  }
  for (const [a, b] of finite) {
    parts.push(`<circle cx="${fmt(sx(a))}" cy="${fmt(sy(b))}" r="3" fill="#b33" opacity="0.8"/>`);
  }
  for (const [i, note] of (opts.annotations ?? []).entries()) {
    parts.push(
      `<text x="${MARGIN.left + 10}" y="${MARGIN.top + 10 + 14 * i}" font-size="12" fill="#222">${note}</text>`,
    );
  }
  return svgDocument(parts.join("\n"));
}

export function barChart(opts: {
  title: string;
  ylabel: string;
  bars: Array<{ label: string; value: number }>;
  guide?: { value: number; label: string };
}): string {
  const maxVal = Math.max(...opts.bars.map((b) => b.value), opts.guide?.value ?? 0, 1e-12);
  const innerW = WIDTH - MARGIN.left - MARGIN.right;
  const slot = innerW / opts.bars.length;
  const sy = (v: number) =>
    HEIGHT - MARGIN.bottom - (v / (maxVal * 1.15)) * (HEIGHT - MARGIN.top - MARGIN.bottom);
  const parts: string[] = [axisFrame(opts.title, "", opts.ylabel)];
  opts.bars.forEach((bar, i) => {
    const x = MARGIN.left + slot * i + slot * 0.2;
    const w = slot * 0.6;
    parts.push(
      `<rect x="${fmt(x)}" y="${fmt(sy(bar.value))}" width="${fmt(w)}" height="${fmt(sy(0) - sy(bar.value))}" fill="#4478b0"/>`,
      `<text x="${fmt(x + w / 2)}" y="${HEIGHT - MARGIN.bottom + 18}" font-size="11" text-anchor="middle">${bar.label}</text>`,
      `<text x="${fmt(x + w / 2)}" y="${fmt(sy(bar.value) - 5)}" font-size="10" text-anchor="middle">${bar.value.toPrecision(3)}</text>`,
    );
  });
  if (opts.guide) {
    parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(sy(opts.guide.value))}" x2="${WIDTH - MARGIN.right}" y2="${fmt(sy(opts.guide.value))}" stroke="#b33" stroke-dasharray="6 4"/>`,
      `<text x="${WIDTH - MARGIN.right - 4}" y="${fmt(sy(opts.guide.value) - 5)}" font-size="11" text-anchor="end" fill="#b33">${opts.guide.label}</text>`,
    );
  }
  return svgDocument(parts.join("\n"));
}

function axisFrame(title: string, xlabel: string, ylabel: string): string {
  return [
    `<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<text x="${WIDTH / 2}" y="22" font-size="15" text-anchor="middle" font-weight="bold">${title}</text>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${HEIGHT - MARGIN.bottom}" stroke="#333"/>`,
    `<line x1="${MARGIN.left}" y1="${HEIGHT - MARGIN.bottom}" x2="${WIDTH - MARGIN.right}" y2="${HEIGHT - MARGIN.bottom}" stroke="#333"/>`,
    `<text x="${WIDTH / 2}" y="${HEIGHT - 12}" font-size="12" text-anchor="middle">${xlabel}</text>`,
    `<text x="16" y="${HEIGHT / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 ${HEIGHT / 2})">${ylabel}</text>`,
  ].join("\n");
}

export function svgDocument(content: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">\n` +
    content +
    "\n</svg>\n"
  );
}

/** Log-linear least squares, recomputed from the CSV as a cross-check of the
 * solver's own fits (same window convention, same estimator). */

export interface FitResult {
  slope: number;
  intercept: number;
  stderr: number;
}

export function logLinearFit(
  t: number[],
  values: number[],
  window: [number, number],
): FitResult {
  const pairs: Array<[number, number]> = [];
  for (let i = 0; i < t.length; i++) {
    if (t[i] >= window[0] && t[i] <= window[1]) {
      if (values[i] <= 0) {
        throw new Error(`nonpositive value ${values[i]} at t=${t[i]} in fit window`);
      }
      pairs.push([t[i], Math.log(values[i])]);
    }
  }
  if (pairs.length < 5) {
    throw new Error(`need >= 5 samples in window, got ${pairs.length}`);
  }
  const n = pairs.length;
  const tMean = pairs.reduce((acc, [a]) => acc + a, 0) / n;
  const yMean = pairs.reduce((acc, [, b]) => acc + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (const [a, b] of pairs) {
    sxx += (a - tMean) * (a - tMean);
    sxy += (a - tMean) * (b - yMean);
  }
  const slope = sxy / sxx;
  const intercept = yMean - slope * tMean;
  let rss = 0;
  for (const [a, b] of pairs) {
    const r = b - (slope * a + intercept);
    rss += r * r;
  }
  const dof = Math.max(n - 2, 1);
  const stderr = Math.sqrt(rss / dof / sxx);
  return { slope, intercept, stderr };
}

/** The fit window used for annotations: the second half of the time base. */
export function defaultWindow(t: number[]): [number, number] {
  const lo = t[0];
  const hi = t[t.length - 1];
  return [lo + (hi - lo) / 2, hi];
}

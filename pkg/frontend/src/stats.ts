/** Series statistics: centered moving-average smoothing and cross-series
 * mean / population standard deviation. */

/** Centered moving average; window 1 is the identity. Near the edges the
 * window shrinks symmetrically so the output has the input's length. */
export function smooth(values: number[], window: number): number[] {
  if (!Number.isInteger(window) || window < 1) {
    throw new Error(`smoothing window must be an integer >= 1, got ${window}`);
  }
  if (window === 1) {
    return values.slice();
  }
  const half = Math.floor(window / 2);
  const out: number[] = new Array(values.length);
  for (let i = 0; i < values.length; i++) {
    const r = Math.min(half, i, values.length - 1 - i);
    let sum = 0;
    for (let k = i - r; k <= i + r; k++) {
      sum += values[k];
    }
    out[i] = sum / (2 * r + 1);
  }
  return out;
}

export interface Band {
  mean: number[];
  std: number[];
}

/** Pointwise mean and population standard deviation over equal-length
 * series. A single series yields a zero-width band. */
export function meanStd(series: number[][]): Band {
  if (series.length === 0) {
    throw new Error("need at least one series");
  }
  const n = series[0].length;
  for (const s of series) {
    if (s.length !== n) {
      throw new Error(
        `series lengths differ: ${series.map((x) => x.length).join(", ")}`,
      );
    }
  }
  const mean: number[] = new Array(n);
  const std: number[] = new Array(n);
  for (let i = 0; i < n; i++) {
    let m = 0;
    for (const s of series) {
      m += s[i];
    }
    m /= series.length;
    let v = 0;
    for (const s of series) {
      v += (s[i] - m) ** 2;
    }
    mean[i] = m;
    std[i] = Math.sqrt(v / series.length);
  }
  return { mean, std };
}

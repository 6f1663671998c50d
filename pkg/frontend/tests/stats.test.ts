import { describe, expect, it } from "vitest";

import { meanStd, smooth } from "../src/stats";

describe("smooth", () => {
  it("window 1 is the identity", () => {
    expect(smooth([3, 1, 4, 1, 5], 1)).toEqual([3, 1, 4, 1, 5]);
  });

  it("averages over a centered window", () => {
    expect(smooth([0, 3, 6, 9, 12], 3)).toEqual([0, 3, 6, 9, 12]);
    expect(smooth([1, 2, 6], 3)).toEqual([1, 3, 6]);
  });

  it("shrinks the window symmetrically at the edges", () => {
    const out = smooth([10, 0, 0, 0, 10], 5);
    expect(out[0]).toBe(10);
    expect(out[1]).toBeCloseTo(10 / 3, 12);
    expect(out[2]).toBe(4);
    expect(out[4]).toBe(10);
  });

  it("preserves a constant series", () => {
    expect(smooth([7, 7, 7, 7], 4)).toEqual([7, 7, 7, 7]);
  });

  it("rejects invalid windows", () => {
    expect(() => smooth([1, 2], 0)).toThrow(/window/);
    expect(() => smooth([1, 2], 2.5)).toThrow(/window/);
  });
});

describe("meanStd", () => {
  it("single series yields a zero-width band", () => {
    const band = meanStd([[1, 2, 3]]);
    expect(band.mean).toEqual([1, 2, 3]);
    expect(band.std).toEqual([0, 0, 0]);
  });

  it("computes pointwise mean and population std", () => {
    const band = meanStd([
      [0, 2],
      [4, 2],
    ]);
    expect(band.mean).toEqual([2, 2]);
    expect(band.std).toEqual([2, 0]);
  });

  it("rejects mismatched lengths and empty input", () => {
    expect(() => meanStd([[1], [1, 2]])).toThrow(/lengths differ/);
    expect(() => meanStd([])).toThrow(/at least one/);
  });
});

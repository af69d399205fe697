import { describe, expect, it } from "vitest";

import { rulerDistanceMeters } from "../src/ruler.js";

describe("rulerDistanceMeters", () => {
  it("measures a 3-4-5 triangle at gsd 1.0", () => {
    expect(
      rulerDistanceMeters({ p1: { x: 0, y: 0 }, p2: { x: 3, y: 4 }, gsd: 1.0 }),
    ).toBe(5.0);
  });

  it("returns 0 for coincident endpoints", () => {
    expect(
      rulerDistanceMeters({ p1: { x: 7, y: 2 }, p2: { x: 7, y: 2 }, gsd: 0.3 }),
    ).toBe(0);
  });

  it("scales linearly with gsd", () => {
    const at1 = rulerDistanceMeters({ p1: { x: 0, y: 0 }, p2: { x: 12, y: 5 }, gsd: 1.0 });
    const atHalf = rulerDistanceMeters({ p1: { x: 0, y: 0 }, p2: { x: 12, y: 5 }, gsd: 0.5 });
    expect(atHalf).toBeCloseTo(at1 / 2, 12);
    expect(at1).toBe(13.0);
  });

  it("rejects a non-positive gsd", () => {
    expect(() =>
      rulerDistanceMeters({ p1: { x: 0, y: 0 }, p2: { x: 1, y: 1 }, gsd: 0 }),
    ).toThrow(RangeError);
  });
});

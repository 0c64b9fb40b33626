import { describe, expect, it } from "vitest";

import { PlanPayload } from "../src/types";
import { dragKnot, fitSampledPoints, planRequestFromKnots, withTimeCursor,
         initialView } from "../src/view";

function straightPlan(): PlanPayload {
  return {
    behavior: { lateral: "keep", longitudinal: "maintain" },
    aggressiveness_s: 3.5,
    knots: Array.from({ length: 6 }, (_, t) => [10 * t, 0]) as [number, number][],
    points: Array.from({ length: 25 }, (_, k) => [2 * (k + 1), 0]) as [number, number][],
    units: { length: "m", time: "s" },
  };
}

describe("plan editing", () => {
  it("keeps exactly six knots through a drag", () => {
    const dragged = dragKnot(straightPlan(), 3, [30, 2]);
    expect(dragged.knots.length).toBe(6);
    expect(dragged.knots[3]).toEqual([30, 2]);
    expect(dragged.knots[2]).toEqual([20, 0]);
  });

  it("never moves the current-pose knot", () => {
    expect(() => dragKnot(straightPlan(), 0, [1, 1])).toThrow();
  });

  it("refits the quintic through a dragged knot", () => {
    const dragged = dragKnot(straightPlan(), 3, [30, 2]);
    const pts = fitSampledPoints(dragged.knots);
    expect(pts.length).toBe(25);
    // frame 15 is the 1 Hz knot at t = 3 s: the refit passes through it
    expect(pts[14][0]).toBeCloseTo(30, 6);
    expect(pts[14][1]).toBeCloseTo(2, 6);
    // untouched knots are still interpolated
    expect(pts[4][0]).toBeCloseTo(10, 6);
    expect(pts[24][1]).toBeCloseTo(0, 6);
  });

  it("builds a predict payload with knots and 25 sampled points", () => {
    const req = planRequestFromKnots(straightPlan()) as {
      knots: unknown[]; points: unknown[] };
    expect(req.knots.length).toBe(6);
    expect(req.points.length).toBe(25);
  });

  it("interpolation is exact for polynomial motion", () => {
    const knots = Array.from({ length: 6 }, (_, t) => [t * t, 3 * t]) as [number, number][];
    const pts = fitSampledPoints(knots);
    pts.forEach(([x, y], k) => {
      const t = 0.2 * (k + 1);
      expect(x).toBeCloseTo(t * t, 8);
      expect(y).toBeCloseTo(3 * t, 8);
    });
  });
});

describe("view state", () => {
  it("clamps the time cursor to the prediction horizon", () => {
    expect(withTimeCursor(initialView(), 7.5).timeCursor).toBe(5);
    expect(withTimeCursor(initialView(), -1).timeCursor).toBe(0);
    expect(withTimeCursor(initialView(), 2.4).timeCursor).toBeCloseTo(2.4);
  });
});

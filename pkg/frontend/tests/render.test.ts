import { describe, expect, it } from "vitest";

import { COLORS, ellipseFromGaussian, renderScene } from "../src/render";
import { PlanPayload, PredictResponse, SceneDetail } from "../src/types";
import { initialView, withTimeCursor } from "../src/view";

const hist = (x: number, y: number): [number, number][] =>
  Array.from({ length: 16 }, (_, i) => [x - (15 - i) * 2, y]);

function scene(): SceneDetail {
  return {
    scene_id: "rec:1:15",
    recording_id: "rec",
    frame: 15,
    ego_id: 1,
    reference_pose: [100, 5.55],
    vehicles: [
      { vehicle_id: 1, role: "ego", is_ego: true, history: hist(100, 5.55),
        current: [100, 5.55], lane_id: 2 },
      { vehicle_id: 2, role: "target", is_ego: false, history: hist(90, 5.55),
        current: [90, 5.55], lane_id: 2 },
      { vehicle_id: 7, role: "neighbor", is_ego: false, history: hist(80, 9.25),
        current: [80, 9.25], lane_id: 3 },
    ],
    target_ids: [2],
    units: { length: "m", time: "s" },
  };
}

function mode(probability: number, dx = 3.0) {
  return {
    lateral: "keep",
    longitudinal: "normal",
    probability,
    mean: Array.from({ length: 25 }, (_, k) => [90 + dx * (k + 1), 5.55]) as [number, number][],
    sigma: Array.from({ length: 25 }, () => [0.5, 0.25]) as [number, number][],
    rho: Array.from({ length: 25 }, () => 0.0),
  };
}

function prediction(collide = false): PredictResponse {
  return {
    scene_id: "rec:1:15",
    targets: [{
      target_id: 2,
      cell: [8, 2],
      probability_sum: 1,
      maneuver_probs: [0.85, 0.06, 0.03, 0.02, 0.02, 0.02],
      argmax_maneuver: 0,
      maneuvers: [mode(0.85), mode(0.06), mode(0.03), mode(0.02), mode(0.02), mode(0.02)],
    }],
    collision: collide
      ? { clear: false, pairs: [{ target_id: 2, frame: 7, point: [95, 5.55] }] }
      : { clear: true, pairs: [] },
    model: { flags: { no_plan: false, no_fusion: false }, build: "t", dataset: "d" },
    units: { length: "m", time: "s" },
  };
}

function plan(): PlanPayload {
  return {
    behavior: { lateral: "keep", longitudinal: "maintain" },
    aggressiveness_s: 3.5,
    knots: [[100, 5.55], [120, 5.55], [140, 5.55], [160, 5.55], [180, 5.55], [200, 5.55]],
    points: Array.from({ length: 25 }, (_, k) => [100 + 4 * (k + 1), 5.55]),
    units: { length: "m", time: "s" },
  };
}

describe("renderScene", () => {
  it("uses the paper color scheme per role", () => {
    const prims = renderScene(scene(), null, initialView(), null);
    const colorsByKind = prims.filter((p) => p.kind === "polyline").map((p) => p.color);
    expect(colorsByKind).toContain(COLORS.ego);
    expect(colorsByKind).toContain(COLORS.target);
    expect(colorsByKind).toContain(COLORS.neighbor);
  });

  it("renders history-only frames without predictions", () => {
    const prims = renderScene(scene(), null, initialView(), null);
    expect(prims.length).toBeGreaterThan(0);
    expect(prims.some((p) => p.kind === "cross")).toBe(false);
  });

  it("hides maneuvers below 10 percent probability by default", () => {
    const view = { ...initialView(), showVariance: false };
    const prims = renderScene(scene(), prediction(), view, null);
    const nVehicles = scene().vehicles.length;
    const dots = prims.filter((p) => p.kind === "dot");
    // only the 85% mode survives the display threshold: 25 gradient dots
    expect(dots.length - nVehicles).toBe(25);
    const all = renderScene(scene(), prediction(),
                            { ...view, showAllManeuvers: true }, null);
    expect(all.filter((p) => p.kind === "dot").length - nVehicles).toBe(6 * 25);
  });

  it("scales marker size with maneuver probability", () => {
    const view = { ...initialView(), showAllManeuvers: true, showVariance: false };
    const prims = renderScene(scene(), prediction(), view, null);
    const radii = new Set(prims.filter((p) => p.kind === "dot" && p.r !== 1.0)
                               .map((p) => (p as { r: number }).r));
    expect(Math.max(...radii)).toBeCloseTo(0.3 + 1.2 * 0.85, 6);
    expect(Math.min(...radii)).toBeCloseTo(0.3 + 1.2 * 0.02, 6);
  });

  it("marks forecast collisions with a cross at the reported point", () => {
    const prims = renderScene(scene(), prediction(true), initialView(), null);
    const crosses = prims.filter((p) => p.kind === "cross");
    expect(crosses).toEqual([
      { kind: "cross", x: 95, y: 5.55, size: 1.5, color: COLORS.collision },
    ]);
  });

  it("respects the playback time cursor", () => {
    const view = { ...withTimeCursor(initialView(), 1.0), showVariance: false };
    const prims = renderScene(scene(), prediction(), view, null);
    const nVehicles = scene().vehicles.length;
    expect(prims.filter((p) => p.kind === "dot").length - nVehicles).toBe(5);
  });

  it("draws six draggable plan knots", () => {
    const prims = renderScene(scene(), null, initialView(), plan());
    const knots = prims.filter((p) => p.kind === "knot");
    expect(knots.length).toBe(6);
    expect(knots.map((k) => (k as { index: number }).index)).toEqual([0, 1, 2, 3, 4, 5]);
  });

  it("is a pure function of its inputs", () => {
    const a = renderScene(scene(), prediction(true), initialView(), plan());
    const b = renderScene(scene(), prediction(true), initialView(), plan());
    expect(a).toEqual(b);
  });
});

describe("ellipseFromGaussian", () => {
  it("degenerates to axis-aligned radii at rho = 0", () => {
    const e = ellipseFromGaussian(2.0, 0.5, 0.0);
    expect(e.rx).toBeCloseTo(2.0, 9);
    expect(e.ry).toBeCloseTo(0.5, 9);
    expect(e.angle).toBeCloseTo(0, 9);
  });

  it("rotates 45 degrees for equal sigmas with positive correlation", () => {
    const e = ellipseFromGaussian(1.0, 1.0, 0.6);
    expect(e.angle).toBeCloseTo(Math.PI / 4, 6);
    expect(e.rx).toBeCloseTo(Math.sqrt(1.6), 6);
    expect(e.ry).toBeCloseTo(Math.sqrt(0.4), 6);
  });
});

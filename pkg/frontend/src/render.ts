// Pure scene rendering: (scene, prediction, view) -> display list.
//
// Everything drawn on screen comes out of this function, so snapshot
// tests pin the full visual contract without a canvas: ego red, targets
// blue, other agents grey, mean trajectories as time-gradient dots whose
// size tracks maneuver probability, variance ellipses from (sigma, rho),
// collision crosses, and the six draggable plan knots.

import { PredictResponse, SceneDetail, PlanPayload } from "./types";
import { MIN_SHOWN_PROBABILITY, ViewState } from "./view";

export const COLORS = {
  ego: "#d62728",        // red
  target: "#1f77b4",     // blue
  neighbor: "#9e9e9e",   // grey
  plan: "#d62728",
  variance: "rgba(44, 160, 44, 0.25)",   // green shadow
  collision: "#000000",
};

export type Primitive =
  | { kind: "dot"; x: number; y: number; r: number; color: string; alpha: number }
  | { kind: "polyline"; points: [number, number][]; color: string; width: number; dash?: number[] }
  | { kind: "ellipse"; x: number; y: number; rx: number; ry: number;
      angle: number; color: string }
  | { kind: "cross"; x: number; y: number; size: number; color: string }
  | { kind: "knot"; x: number; y: number; index: number; r: number; color: string };

/** Principal axes of the 2D Gaussian described by (sx, sy, rho). */
export function ellipseFromGaussian(sx: number, sy: number, rho: number):
    { rx: number; ry: number; angle: number } {
  const vxx = sx * sx;
  const vyy = sy * sy;
  const vxy = rho * sx * sy;
  const tr = vxx + vyy;
  const det = Math.sqrt(Math.max(0, (vxx - vyy) * (vxx - vyy) + 4 * vxy * vxy));
  const l1 = (tr + det) / 2;
  const l2 = (tr - det) / 2;
  return {
    rx: Math.sqrt(Math.max(l1, 0)),
    ry: Math.sqrt(Math.max(l2, 0)),
    angle: 0.5 * Math.atan2(2 * vxy, vxx - vyy),
  };
}

function vehicleColor(role: string): string {
  if (role === "ego") return COLORS.ego;
  if (role === "target") return COLORS.target;
  return COLORS.neighbor;
}

export function renderScene(scene: SceneDetail, prediction: PredictResponse | null,
                            view: ViewState, plan: PlanPayload | null): Primitive[] {
  const out: Primitive[] = [];

  for (const v of scene.vehicles) {
    const color = vehicleColor(v.role);
    out.push({ kind: "polyline", points: v.history, color, width: 1 });
    out.push({ kind: "dot", x: v.current[0], y: v.current[1], r: 1.0, color, alpha: 1 });
  }

  if (plan) {
    out.push({ kind: "polyline", points: plan.points, color: COLORS.plan,
               width: 1, dash: [2, 2] });
    plan.knots.forEach(([x, y], index) => {
      out.push({ kind: "knot", x, y, index, r: 0.9, color: COLORS.plan });
    });
  }

  if (!prediction) return out;

  const maxFrame = Math.max(1, Math.round((view.timeCursor / 5.0) * 25));
  for (const tgt of prediction.targets) {
    for (const mode of tgt.maneuvers) {
      if (!view.showAllManeuvers && mode.probability < MIN_SHOWN_PROBABILITY) {
        continue;   // paper display rule: only maneuvers above 10% are shown
      }
      // marker size tracks the maneuver probability; opacity fades with time
      const r = 0.3 + 1.2 * mode.probability;
      mode.mean.slice(0, maxFrame).forEach(([x, y], k) => {
        out.push({ kind: "dot", x, y, r, color: COLORS.target,
                   alpha: 0.25 + 0.75 * (k / 24) });
      });
      if (view.showVariance) {
        const k = maxFrame - 1;
        const e = ellipseFromGaussian(mode.sigma[k][0], mode.sigma[k][1], mode.rho[k]);
        out.push({ kind: "ellipse", x: mode.mean[k][0], y: mode.mean[k][1],
                   rx: e.rx, ry: e.ry, angle: e.angle, color: COLORS.variance });
      }
    }
  }

  for (const pair of prediction.collision.pairs) {
    out.push({ kind: "cross", x: pair.point[0], y: pair.point[1], size: 1.5,
               color: COLORS.collision });
  }
  return out;
}

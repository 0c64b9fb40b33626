// View state for the what-if loop.  Plan knots are always the six 1 Hz
// waypoints (current position plus five future points); the time cursor
// runs over the 5 s prediction horizon.

import { PlanPayload } from "./types";

export const HORIZON_S = 5.0;
export const KNOT_COUNT = 6;
export const MIN_SHOWN_PROBABILITY = 0.1; // per-maneuver display threshold

export interface ViewState {
  sceneId: string | null;
  plan: PlanPayload | null;
  showAllManeuvers: boolean;    // false: only maneuvers above 10% probability
  showVariance: boolean;
  timeCursor: number;           // seconds in [0, HORIZON_S]
}

export function initialView(): ViewState {
  return {
    sceneId: null,
    plan: null,
    showAllManeuvers: false,
    showVariance: true,
    timeCursor: HORIZON_S,
  };
}

export function withTimeCursor(view: ViewState, t: number): ViewState {
  return { ...view, timeCursor: Math.min(HORIZON_S, Math.max(0, t)) };
}

export function assertPlanInvariants(plan: PlanPayload): void {
  if (plan.knots.length !== KNOT_COUNT) {
    throw new Error(`plan must have ${KNOT_COUNT} knots, got ${plan.knots.length}`);
  }
  if (plan.points.length !== 25) {
    throw new Error(`plan must have 25 sampled points, got ${plan.points.length}`);
  }
}

/** Move one 1 Hz knot; knot 0 (the current pose) is not editable. */
export function dragKnot(plan: PlanPayload, index: number,
                         to: [number, number]): PlanPayload {
  assertPlanInvariants(plan);
  if (index <= 0 || index >= KNOT_COUNT) {
    throw new Error(`knot ${index} is not draggable`);
  }
  const knots = plan.knots.map((k, i) => (i === index ? to : k)) as [number, number][];
  return { ...plan, knots, behavior: { lateral: "custom", longitudinal: "custom" } };
}

/** Request payload for a dragged plan: the service refits the quintic
 * through the six knots and treats its sampled points as authoritative. */
export function planRequestFromKnots(plan: PlanPayload): unknown {
  assertPlanInvariants(plan);
  return { knots: plan.knots, points: fitSampledPoints(plan.knots) };
}

// Degree-5 interpolation through the six 1 Hz knots, sampled at 5 Hz.
// This mirrors the backend's plan representation so the dragged preview
// matches what the service will predict against.
export function fitSampledPoints(knots: [number, number][]): [number, number][] {
  const ts = [0, 1, 2, 3, 4, 5];
  const coefX = solveVandermonde(ts, knots.map((k) => k[0]));
  const coefY = solveVandermonde(ts, knots.map((k) => k[1]));
  const out: [number, number][] = [];
  for (let k = 1; k <= 25; k++) {
    const t = 0.2 * k;
    out.push([polyval(coefX, t), polyval(coefY, t)]);
  }
  return out;
}

function polyval(coef: number[], t: number): number {
  let acc = 0;
  for (let i = coef.length - 1; i >= 0; i--) acc = acc * t + coef[i];
  return acc;
}

function solveVandermonde(ts: number[], ys: number[]): number[] {
  const n = ts.length;
  const a: number[][] = ts.map((t) => {
    const row = new Array(n);
    for (let j = 0; j < n; j++) row[j] = Math.pow(t, j);
    return row;
  });
  const b = ys.slice();
  // Gaussian elimination with partial pivoting; n is always 6.
  for (let col = 0; col < n; col++) {
    let pivot = col;
    for (let r = col + 1; r < n; r++) {
      if (Math.abs(a[r][col]) > Math.abs(a[pivot][col])) pivot = r;
    }
    [a[col], a[pivot]] = [a[pivot], a[col]];
    [b[col], b[pivot]] = [b[pivot], b[col]];
    for (let r = col + 1; r < n; r++) {
      const f = a[r][col] / a[col][col];
      for (let j = col; j < n; j++) a[r][j] -= f * a[col][j];
      b[r] -= f * b[col];
    }
  }
  const x = new Array(n).fill(0);
  for (let r = n - 1; r >= 0; r--) {
    let acc = b[r];
    for (let j = r + 1; j < n; j++) acc -= a[r][j] * x[j];
    x[r] = acc / a[r][r];
  }
  return x;
}

// What-if explorer: pick a scene, choose or drag a candidate plan, watch
// the plan-conditioned predictions and collision flags update.

import { ApiClient } from "./api";
import { fitViewport, paint, toWorld, Viewport } from "./canvas";
import { renderScene } from "./render";
import { PredictScheduler } from "./scheduler";
import { PlanPayload, PredictResponse, SceneDetail } from "./types";
import { dragKnot, initialView, planRequestFromKnots, withTimeCursor } from "./view";

const api = new ApiClient("");
const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const sceneSelect = document.getElementById("scene-select") as HTMLSelectElement;
const lateralSelect = document.getElementById("lateral") as HTMLSelectElement;
const longitudinalSelect = document.getElementById("longitudinal") as HTMLSelectElement;
const aggressiveness = document.getElementById("aggressiveness") as HTMLSelectElement;
const timeSlider = document.getElementById("time-cursor") as HTMLInputElement;
const varianceToggle = document.getElementById("show-variance") as HTMLInputElement;
const allManeuvers = document.getElementById("all-maneuvers") as HTMLInputElement;
const statusLine = document.getElementById("status")!;

let view = initialView();
let scene: SceneDetail | null = null;
let prediction: PredictResponse | null = null;
let candidates: PlanPayload[] = [];
let viewport: Viewport | null = null;
let dragging: number | null = null;

const scheduler = new PredictScheduler<unknown, PredictResponse>(
  (plan) => api.predict(view.sceneId!, plan),
  (res) => {
    prediction = res;
    statusLine.textContent = res.collision.clear
      ? "no collision forecast"
      : `collision forecast: target ${res.collision.pairs[0].target_id} `
        + `at frame ${res.collision.pairs[0].frame}`;
    statusLine.className = res.collision.clear ? "ok" : "bad";
    draw();
  },
  (err) => {
    statusLine.textContent = String(err);
    statusLine.className = "bad";
  },
);

function draw(): void {
  if (!scene) return;
  const pts: [number, number][] = scene.vehicles.flatMap((v) => v.history);
  if (view.plan) pts.push(...view.plan.points);
  viewport = fitViewport(pts, canvas.width, canvas.height);
  paint(ctx, viewport, renderScene(scene, prediction, view, view.plan));
}

function requestPrediction(): void {
  if (!view.plan || !view.sceneId) return;
  scheduler.request(planRequestFromKnots(view.plan));
}

function pickCandidate(): void {
  const lat = lateralSelect.value;
  const lon = longitudinalSelect.value;
  const dur = parseFloat(aggressiveness.value);
  const match = candidates.find(
    (p) => p.behavior.lateral === lat && p.behavior.longitudinal === lon
      && Math.abs(p.aggressiveness_s - dur) < 1e-6);
  if (match) {
    view = { ...view, plan: match };
    prediction = null;
    requestPrediction();
    draw();
  }
}

async function selectScene(id: string): Promise<void> {
  scene = await api.scene(id);
  view = { ...initialView(), sceneId: id, showVariance: varianceToggle.checked };
  prediction = null;
  const cand = await api.candidates(id);
  candidates = cand.plans;
  pickCandidate();
  draw();
}

async function boot(): Promise<void> {
  const listing = await api.listScenes(100);
  for (const s of listing.scenes) {
    const opt = document.createElement("option");
    opt.value = s.scene_id;
    opt.textContent = `${s.scene_id} (${s.target_count} targets)`;
    sceneSelect.appendChild(opt);
  }
  if (listing.scenes.length) {
    await selectScene(listing.scenes[0].scene_id);
  }
}

sceneSelect.addEventListener("change", () => void selectScene(sceneSelect.value));
for (const el of [lateralSelect, longitudinalSelect, aggressiveness]) {
  el.addEventListener("change", pickCandidate);
}
timeSlider.addEventListener("input", () => {
  view = withTimeCursor(view, parseFloat(timeSlider.value));
  draw();
});
varianceToggle.addEventListener("change", () => {
  view = { ...view, showVariance: varianceToggle.checked };
  draw();
});
allManeuvers.addEventListener("change", () => {
  view = { ...view, showAllManeuvers: allManeuvers.checked };
  draw();
});

canvas.addEventListener("mousedown", (ev) => {
  if (!view.plan || !viewport) return;
  const rect = canvas.getBoundingClientRect();
  const [wx, wy] = toWorld(viewport, ev.clientX - rect.left, ev.clientY - rect.top);
  // grab the nearest draggable knot within one meter
  let best = -1;
  let bestDist = 1.0;
  view.plan.knots.forEach(([x, y], i) => {
    if (i === 0) return;
    const d = Math.hypot(x - wx, y - wy);
    if (d < bestDist) { best = i; bestDist = d; }
  });
  if (best > 0) dragging = best;
});

canvas.addEventListener("mousemove", (ev) => {
  if (dragging === null || !view.plan || !viewport) return;
  const rect = canvas.getBoundingClientRect();
  const [wx, wy] = toWorld(viewport, ev.clientX - rect.left, ev.clientY - rect.top);
  view = { ...view, plan: dragKnot(view.plan, dragging, [wx, wy]) };
  requestPrediction();
  draw();
});

window.addEventListener("mouseup", () => { dragging = null; });

void boot();

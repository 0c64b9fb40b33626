// Thin typed wrapper over the forecasting service.

import { CandidatesResponse, PredictResponse, SceneDetail, SceneSummary } from "./types";

export class ApiClient {
  constructor(private base: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.base + path);
    if (!res.ok) throw new Error(`${path}: ${res.status} ${await res.text()}`);
    return res.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new Error(`${path}: ${res.status} ${await res.text()}`);
    return res.json() as Promise<T>;
  }

  listScenes(limit = 50): Promise<{ scenes: SceneSummary[]; total: number }> {
    return this.get(`/scenes?limit=${limit}`);
  }

  scene(id: string): Promise<SceneDetail> {
    return this.get(`/scenes/${encodeURIComponent(id)}`);
  }

  candidates(sceneId: string): Promise<CandidatesResponse> {
    return this.post("/candidates", { scene_id: sceneId });
  }

  predict(sceneId: string, plan: unknown): Promise<PredictResponse> {
    return this.post("/predict", { scene_id: sceneId, plan });
  }
}

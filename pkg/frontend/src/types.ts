// Wire types mirroring the forecasting service's JSON payloads.

export interface SceneSummary {
  scene_id: string;
  recording_id: string;
  frame: number;
  vehicle_count: number;
  target_count: number;
  bbox: { min_x: number; max_x: number; min_y: number; max_y: number };
}

export interface SceneVehicle {
  vehicle_id: number;
  role: "ego" | "target" | "neighbor";
  is_ego: boolean;
  history: [number, number][];
  current: [number, number];
  lane_id: number | null;
}

export interface SceneDetail {
  scene_id: string;
  recording_id: string;
  frame: number;
  ego_id: number;
  reference_pose: [number, number];
  vehicles: SceneVehicle[];
  target_ids: number[];
  units: { length: string; time: string };
}

export interface PlanPayload {
  behavior: { lateral: string; longitudinal: string };
  aggressiveness_s: number;
  knots: [number, number][];
  points: [number, number][];
  units: { length: string; time: string };
}

export interface ManeuverMode {
  lateral: string;
  longitudinal: string;
  probability: number;
  mean: [number, number][];
  sigma: [number, number][];
  rho: number[];
}

export interface TargetPrediction {
  target_id: number;
  cell: [number, number];
  probability_sum: number;
  maneuver_probs: number[];
  argmax_maneuver: number;
  maneuvers: ManeuverMode[];
}

export interface CollisionPair {
  target_id: number;
  frame: number;
  point: [number, number];
}

export interface PredictResponse {
  scene_id: string;
  targets: TargetPrediction[];
  collision: { clear: boolean; pairs: CollisionPair[] };
  model: { flags: Record<string, boolean>; build: string; dataset: string };
  units: { length: string; time: string };
}

export interface CandidatesResponse {
  scene_id: string;
  count: number;
  plans: PlanPayload[];
}

"""What-if exploration service.

Read-only HTTP/JSON surface over a scene snapshot and one loaded
checkpoint: list scenes, fetch one scene, generate candidate plans for a
scene's ego state, and predict all targets conditioned on an arbitrary
plan (with a collision report against the argmax-mode means).  Every
trajectory payload carries explicit units so feet never sneak across the
boundary.  All state is immutable after startup; identical requests get
identical responses.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .batching import collate
from .checkpoint import load_checkpoint
from .errors import ContractViolation
from .network import to_predictions
from .planning import (CandidatePlan, collision_check, generate_candidates,
                       plan_from_dict, plan_to_dict)
from .scenes import ManeuverLabel, SceneSample, T_PRED, read_scenes

UNITS = {"length": "m", "time": "s", "frame_period_s": 0.2}


class SceneStore:
    """Immutable id-addressable snapshot of scene samples."""

    def __init__(self, samples: list[SceneSample], dataset: str):
        self.dataset = dataset
        self.order = [s.scene_id for s in samples]
        self.by_id = {s.scene_id: s for s in samples}

    @classmethod
    def from_file(cls, path: str | Path, dataset: str | None = None) -> "SceneStore":
        path = Path(path)
        return cls(read_scenes(path), dataset or path.stem)


class MenuSpec(BaseModel):
    lateral: list[str] = ["keep", "left", "right"]
    longitudinal: list[str] = ["accelerate", "maintain", "decelerate"]
    aggressiveness: list[float] = [2.5, 3.5, 4.5]


class CandidatesRequest(BaseModel):
    scene_id: str
    menus: MenuSpec = Field(default_factory=MenuSpec)


class PredictRequest(BaseModel):
    scene_id: str
    plan: dict | list
    flags: dict | None = None


def _scene_summary(sample: SceneSample) -> dict:
    positions = [sample.reference_pose] + [t.history.points[-1] for t in sample.targets]
    pts = np.asarray(positions)
    return {
        "scene_id": sample.scene_id,
        "recording_id": sample.recording_id,
        "frame": sample.frame,
        "vehicle_count": 1 + len(sample.targets)
        + sum(len(t.neighbors) for t in sample.targets),
        "target_count": len(sample.targets),
        "bbox": {"min_x": round(float(pts[:, 0].min()), 3),
                 "max_x": round(float(pts[:, 0].max()), 3),
                 "min_y": round(float(pts[:, 1].min()), 3),
                 "max_y": round(float(pts[:, 1].max()), 3)},
    }


def _scene_detail(sample: SceneSample) -> dict:
    vehicles = {}

    def add(vid: int, history, role: str):
        if vid not in vehicles:
            vehicles[vid] = {
                "vehicle_id": vid,
                "role": role,
                "is_ego": role == "ego",
                "history": np.round(history.points, 4).tolist(),
                "current": np.round(history.points[-1], 4).tolist(),
                "lane_id": sample.lane_ids.get(vid),
            }

    add(sample.ego_id, sample.ego_history, "ego")
    for tgt in sample.targets:
        add(tgt.vehicle_id, tgt.history, "target")
    for tgt in sample.targets:
        for nbr in tgt.neighbors:
            add(nbr.vehicle_id, nbr.history, "neighbor")

    return {
        "scene_id": sample.scene_id,
        "recording_id": sample.recording_id,
        "frame": sample.frame,
        "ego_id": sample.ego_id,
        "reference_pose": np.round(sample.reference_pose, 4).tolist(),
        "vehicles": sorted(vehicles.values(), key=lambda v: v["vehicle_id"]),
        "target_ids": [t.vehicle_id for t in sample.targets],
        "units": UNITS,
    }


def _parse_plan_points(plan: dict | list) -> np.ndarray:
    try:
        if isinstance(plan, dict):
            if "points" in plan and "knots" not in plan:
                points = np.asarray(plan["points"], dtype=float)
            else:
                points = plan_from_dict(plan).trajectory.points
        else:
            points = np.asarray(plan, dtype=float)
    except (ContractViolation, KeyError, TypeError, ValueError) as exc:
        raise HTTPException(422, f"malformed plan: {exc}") from exc
    if points.shape != (T_PRED, 2) or not np.isfinite(points).all():
        raise HTTPException(422, f"plan must be {T_PRED} finite (x, y) points, "
                                 f"got shape {list(points.shape)}")
    return points


def _ego_speed(sample: SceneSample) -> float:
    tail = sample.ego_history.points[-2:]
    return float(np.linalg.norm(tail[1] - tail[0]) / 0.2)


def create_app(checkpoint_path: str | Path | None = None,
               scenes_path: str | Path | None = None,
               *, lane_width: float = 3.7, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="pip-forecast what-if service")
    store = SceneStore.from_file(scenes_path) if scenes_path else SceneStore([], "empty")
    model, manifest = (None, None)
    if checkpoint_path:
        model, manifest = load_checkpoint(checkpoint_path)

    def get_scene(scene_id: str) -> SceneSample:
        sample = store.by_id.get(scene_id)
        if sample is None:
            raise HTTPException(404, f"unknown scene {scene_id!r}")
        return sample

    @app.get("/scenes")
    def list_scenes(dataset: str | None = None, limit: int = 20, offset: int = 0):
        if dataset is not None and dataset != store.dataset:
            raise HTTPException(404, f"unknown dataset {dataset!r} (serving {store.dataset!r})")
        ids = store.order[offset: offset + max(0, limit)]
        return {"dataset": store.dataset, "total": len(store.order),
                "offset": offset, "scenes": [_scene_summary(store.by_id[i]) for i in ids]}

    @app.get("/scenes/{scene_id}")
    def scene_detail(scene_id: str):
        return _scene_detail(get_scene(scene_id))

    @app.post("/candidates")
    def candidates(req: CandidatesRequest):
        sample = get_scene(req.scene_id)
        try:
            plans = generate_candidates(
                sample.reference_pose, _ego_speed(sample), lane_width,
                lateral_menu=tuple(req.menus.lateral),
                longitudinal_menu=tuple(req.menus.longitudinal),
                aggressiveness=tuple(req.menus.aggressiveness))
        except ContractViolation as exc:
            raise HTTPException(422, str(exc)) from exc
        return {"scene_id": req.scene_id, "count": len(plans),
                "plans": [plan_to_dict(p) for p in plans]}

    @app.post("/predict")
    def predict(req: PredictRequest):
        if model is None:
            raise HTTPException(503, "no model checkpoint loaded")
        sample = get_scene(req.scene_id)
        if req.flags:
            for key in ("no_plan", "no_fusion"):
                want = bool(req.flags.get(key, manifest["flags"][key]))
                if want != manifest["flags"][key]:
                    raise HTTPException(
                        422, f"flag {key}={want} conflicts with loaded checkpoint "
                             f"({manifest['flags']})")
        points = _parse_plan_points(req.plan)

        import torch
        with torch.no_grad():
            batch = collate([sample], plan_source=lambda s: points, grid=model.cfg.grid)
            out = model(batch, maneuvers="all")
        preds = to_predictions(batch, out)[0]

        targets = []
        for tgt, pred in zip(sample.targets, preds):
            modes = []
            for k in range(6):
                label = ManeuverLabel.from_position(k)
                modes.append({
                    "lateral": label.lateral,
                    "longitudinal": label.longitudinal,
                    "probability": round(float(pred.probs[k]), 9),
                    "mean": np.round(pred.mu[k], 4).tolist(),
                    "sigma": np.round(pred.sigma[k], 4).tolist(),
                    "rho": np.round(pred.rho[k], 4).tolist(),
                })
            targets.append({
                "target_id": pred.target_id,
                "cell": list(tgt.cell),
                "probability_sum": round(float(pred.probs.sum()), 9),
                "maneuver_probs": np.round(pred.probs, 9).tolist(),
                "argmax_maneuver": pred.argmax_maneuver,
                "maneuvers": modes,
                "units": UNITS,
            })

        collision = collision_check(points, [(p.target_id, p.best_mean) for p in preds])
        return {
            "scene_id": req.scene_id,
            "targets": targets,
            "collision": {
                "clear": collision.clear,
                "pairs": [{"target_id": tid, "frame": frame, "point": list(point)}
                          for tid, frame, point in collision.pairs],
            },
            "model": {"flags": manifest["flags"], "build": manifest["build"],
                      "dataset": manifest["dataset"]},
            "units": UNITS,
        }

    if ui_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def candidate_plan_for(sample: SceneSample, lateral: str, longitudinal: str,
                       aggressiveness: float, lane_width: float = 3.7) -> CandidatePlan:
    """One candidate plan seeded from a scene's ego state (test/CLI helper)."""
    plans = generate_candidates(sample.reference_pose, _ego_speed(sample), lane_width,
                                lateral_menu=(lateral,), longitudinal_menu=(longitudinal,),
                                aggressiveness=(aggressiveness,))
    return plans[0]

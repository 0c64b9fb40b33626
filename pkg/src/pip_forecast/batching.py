"""Collation of scene samples into the tensors the network consumes.

Every trajectory is translated into the frame of the target it belongs
to (the target's position at the current frame becomes the origin), so
the network never sees absolute road coordinates.  The plan input is
pluggable: the ego's true future during training, or the quintic refit
of its 1 Hz waypoints for evaluation and serving.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch

from .errors import ContractViolation
from .grid import GridSpec, cell_index
from .planning import fit_quintic, sample_spline
from .scenes import SceneSample, T_PRED

PlanSource = Callable[[SceneSample], np.ndarray]


def truth_plan(sample: SceneSample) -> np.ndarray:
    """Training-time plan: the ego's actual future trajectory."""
    return sample.ego_plan.points


def spline_plan(sample: SceneSample) -> np.ndarray:
    """Evaluation-time plan: quintic refit of the 1 Hz-downsampled future.

    Knots are the current ego position plus the five 1 Hz future points;
    the refit restricts the predictor to waypoint-level plan knowledge.
    """
    future = sample.ego_plan.points
    knots = np.vstack([sample.reference_pose, future[4::5]])
    return sample_spline(fit_quintic(knots)).points


PLAN_SOURCES: dict[str, PlanSource] = {"truth": truth_plan, "spline": spline_plan}


def resolve_plan_source(source: str | PlanSource) -> PlanSource:
    if callable(source):
        return source
    if source not in PLAN_SOURCES:
        raise ContractViolation(f"unknown plan source {source!r}; have {sorted(PLAN_SOURCES)}")
    return PLAN_SOURCES[source]


@dataclass
class SceneBatch:
    """Flattened batch over samples and their targets.

    hist rows 0..n_targets-1 are the targets' own histories; the rest are
    neighbor histories addressed by (nbr_slot, nbr_cell).
    """

    n_samples: int
    n_targets: int
    hist: torch.Tensor        # (K, 16, 2) target-relative histories
    plans: torch.Tensor       # (N, 25, 2) target-relative ego plans
    plan_cell: torch.Tensor   # (N, 2) ego cell in each target's grid
    plan_valid: torch.Tensor  # (N,) bool; False when ego is outside the area
    nbr_slot: torch.Tensor    # (M,) owning target per neighbor row
    nbr_cell: torch.Tensor    # (M, 2)
    tgt_slot: torch.Tensor    # (N,) owning sample per target
    tgt_cell: torch.Tensor    # (N, 2) cell in the ego-centric grid
    m_true: torch.Tensor      # (N,) maneuver slots (0..5)
    truth: torch.Tensor       # (N, 25, 2) target-relative future truths
    last_pos_abs: np.ndarray  # (N, 2) absolute positions at the current frame
    target_ids: list[int]
    scene_ids: list[str]

    def to_dtype(self, dtype: torch.dtype) -> "SceneBatch":
        out = SceneBatch(**{**self.__dict__})
        for name in ("hist", "plans", "truth"):
            setattr(out, name, getattr(self, name).to(dtype))
        return out


def collate(samples: Sequence[SceneSample], plan_source: str | PlanSource = "truth",
            grid: GridSpec = GridSpec(), dtype: torch.dtype = torch.float32) -> SceneBatch:
    """Assemble one SceneBatch from scene samples."""
    plan_fn = resolve_plan_source(plan_source)

    cent_hist, nbr_hist = [], []
    plans, plan_cells, plan_valid = [], [], []
    nbr_slot, nbr_cell, tgt_slot, tgt_cell = [], [], [], []
    m_true, truth, last_pos, target_ids, scene_ids = [], [], [], [], []

    n = 0
    for s_idx, sample in enumerate(samples):
        scene_ids.append(sample.scene_id)
        plan_points = np.asarray(plan_fn(sample), dtype=float)
        if plan_points.shape != (T_PRED, 2):
            raise ContractViolation(f"plan for {sample.scene_id} must be ({T_PRED}, 2)")
        for tgt in sample.targets:
            ref = tgt.history.points[-1]
            cent_hist.append(tgt.history.points - ref)
            truth.append(tgt.future.points - ref)
            plans.append(plan_points - ref)
            ego_cell = cell_index(sample.reference_pose - ref, grid)
            plan_cells.append(ego_cell if ego_cell is not None else (0, 0))
            plan_valid.append(ego_cell is not None)
            for nbr in tgt.neighbors:
                nbr_hist.append(nbr.history.points - ref)
                nbr_slot.append(n)
                nbr_cell.append(nbr.cell)
            tgt_slot.append(s_idx)
            tgt_cell.append(tgt.cell)
            m_true.append(tgt.label.position)
            last_pos.append(ref)
            target_ids.append(tgt.vehicle_id)
            n += 1

    def stack(rows, shape):
        if rows:
            return torch.as_tensor(np.stack(rows), dtype=dtype)
        return torch.zeros(shape, dtype=dtype)

    def index(rows, shape):
        if rows:
            return torch.as_tensor(np.asarray(rows), dtype=torch.long)
        return torch.zeros(shape, dtype=torch.long)

    return SceneBatch(
        n_samples=len(samples),
        n_targets=n,
        hist=stack(cent_hist + nbr_hist, (0, 16, 2)),
        plans=stack(plans, (0, T_PRED, 2)),
        plan_cell=index(plan_cells, (0, 2)),
        plan_valid=torch.as_tensor(plan_valid, dtype=torch.bool) if plan_valid
        else torch.zeros((0,), dtype=torch.bool),
        nbr_slot=index(nbr_slot, (0,)),
        nbr_cell=index(nbr_cell, (0, 2)),
        tgt_slot=index(tgt_slot, (0,)),
        tgt_cell=index(tgt_cell, (0, 2)),
        m_true=index(m_true, (0,)),
        truth=stack(truth, (0, T_PRED, 2)),
        last_pos_abs=np.asarray(last_pos, dtype=float) if last_pos else np.zeros((0, 2)),
        target_ids=target_ids,
        scene_ids=scene_ids,
    )

"""Error and likelihood metrics over 1..5 s horizons, plus report rendering.

RMSE follows the argmax-maneuver protocol: the mode with the highest
joint probability supplies the point predictions, squared errors are
accumulated globally over every target of every sample and the root is
taken of the global mean (mean-then-root, not per-sample roots).  NLL
evaluates the true position under the full 6-mode per-frame 2D mixture
via log-sum-exp, so values are comparable across horizons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch

from .batching import collate
from .errors import ContractViolation
from .network import PipNet, integrate_displacements, to_predictions
from .scenes import SceneSample, T_PRED

HORIZONS_S = (1, 2, 3, 4, 5)
HORIZON_FRAMES = tuple(5 * h for h in HORIZONS_S)   # 1-based future frames

_LOG_2PI = float(np.log(2.0 * np.pi))
_SIGMA_FLOOR = 1e-3
_RHO_CLAMP = 0.999


def np_bivariate_log_density(mu, sigma, rho, y):
    """Numpy twin of the torch density, same clamping rules."""
    sx = np.maximum(sigma[..., 0], _SIGMA_FLOOR)
    sy = np.maximum(sigma[..., 1], _SIGMA_FLOOR)
    r = np.clip(rho, -_RHO_CLAMP, _RHO_CLAMP)
    dx = (y[..., 0] - mu[..., 0]) / sx
    dy = (y[..., 1] - mu[..., 1]) / sy
    one_m_r2 = 1.0 - r * r
    z = dx * dx + dy * dy - 2.0 * r * dx * dy
    return -(_LOG_2PI + np.log(sx) + np.log(sy) + 0.5 * np.log(one_m_r2)) - z / (2.0 * one_m_r2)


def horizon_rmse(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Root of the global mean squared Euclidean error at each horizon.

    pred/truth: (N, 25, 2).  Returns (5,) for 1..5 s.
    """
    pred = np.asarray(pred, float)
    truth = np.asarray(truth, float)
    if pred.shape != truth.shape or pred.shape[-2:] != (T_PRED, 2):
        raise ContractViolation(f"expected matching (N, {T_PRED}, 2) arrays")
    if len(pred) == 0:
        raise ValueError("empty evaluation set")
    sq = ((pred - truth) ** 2).sum(axis=-1)            # (N, 25)
    frames = np.array(HORIZON_FRAMES) - 1
    return np.sqrt(sq[:, frames].mean(axis=0))


def horizon_nll(probs: np.ndarray, mu: np.ndarray, sigma: np.ndarray,
                rho: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Mixture NLL (nats) of the truth at each horizon frame, averaged over targets.

    probs: (N, 6); mu/sigma: (N, 6, 25, 2); rho: (N, 6, 25); truth: (N, 25, 2).
    """
    if len(probs) == 0:
        raise ValueError("empty evaluation set")
    log_comp = np_bivariate_log_density(mu, sigma, rho, truth[:, None, :, :])  # (N, 6, 25)
    log_w = np.log(np.maximum(probs, 1e-300))[:, :, None]
    stack = log_w + log_comp
    m = stack.max(axis=1, keepdims=True)
    log_mix = m[:, 0] + np.log(np.exp(stack - m).sum(axis=1))                  # (N, 25)
    frames = np.array(HORIZON_FRAMES) - 1
    return -log_mix[:, frames].mean(axis=0)


def predict_arrays(model: PipNet, samples: list[SceneSample], plan_source: str = "spline",
                   batch_size: int = 128):
    """Run inference over samples and return stacked per-target arrays.

    Returns dict with probs (N,6), mu (N,6,25,2), sigma, rho, best (N,25,2)
    argmax-mode means, truth (N,25,2) absolute, target_ids, scene_ids.
    """
    probs, delta, sigma, rho, last, truth, ids, scenes = [], [], [], [], [], [], [], []
    model.eval()
    with torch.no_grad():
        for k in range(0, len(samples), batch_size):
            batch = collate(samples[k:k + batch_size], plan_source=plan_source,
                            grid=model.cfg.grid)
            if batch.n_targets == 0:
                continue
            out = model(batch, maneuvers="all")
            probs.append(out.joint.numpy())
            delta.append(out.delta.numpy())
            sigma.append(out.sigma.numpy())
            rho.append(out.rho.numpy())
            last.append(batch.last_pos_abs)
            truth.append(batch.truth.numpy() + batch.last_pos_abs[:, None, :])
            ids.extend(batch.target_ids)
            for i in range(batch.n_targets):
                scenes.append(batch.scene_ids[int(batch.tgt_slot[i])])
    if not probs:
        raise ValueError("empty evaluation set: no targets in any sample")
    probs = np.concatenate(probs)
    delta = np.concatenate(delta)
    sigma = np.concatenate(sigma)
    rho = np.concatenate(rho)
    last = np.concatenate(last)
    truth = np.concatenate(truth)
    mu = integrate_displacements(last[:, None, :], delta)                      # (N, 6, 25, 2)
    best = mu[np.arange(len(probs)), probs.argmax(axis=1)]
    return {"probs": probs, "mu": mu, "sigma": sigma, "rho": rho, "best": best,
            "truth": truth, "target_ids": ids, "scene_ids": scenes}


def evaluate_rmse(model: PipNet, samples: list[SceneSample],
                  plan_source: str = "spline") -> dict[int, float]:
    arrays = predict_arrays(model, samples, plan_source)
    vals = horizon_rmse(arrays["best"], arrays["truth"])
    return {h: float(v) for h, v in zip(HORIZONS_S, vals)}


def evaluate_nll(model: PipNet, samples: list[SceneSample],
                 plan_source: str = "spline") -> dict[int, float]:
    arrays = predict_arrays(model, samples, plan_source)
    vals = horizon_nll(arrays["probs"], arrays["mu"], arrays["sigma"],
                       arrays["rho"], arrays["truth"])
    return {h: float(v) for h, v in zip(HORIZONS_S, vals)}


@dataclass
class EvalReport:
    rmse: dict[int, float]
    nll: dict[int, float]
    counts: dict[str, int]
    config: dict

    def as_dict(self) -> dict:
        return {"rmse_m": {str(h): round(v, 4) for h, v in self.rmse.items()},
                "nll_nats": {str(h): round(v, 4) for h, v in self.nll.items()},
                "counts": self.counts, "config": self.config}


def evaluate(model: PipNet, samples: list[SceneSample], manifest: dict | None = None,
             plan_source: str = "spline") -> EvalReport:
    arrays = predict_arrays(model, samples, plan_source)
    rmse = horizon_rmse(arrays["best"], arrays["truth"])
    nll = horizon_nll(arrays["probs"], arrays["mu"], arrays["sigma"],
                      arrays["rho"], arrays["truth"])
    return EvalReport(
        rmse={h: float(v) for h, v in zip(HORIZONS_S, rmse)},
        nll={h: float(v) for h, v in zip(HORIZONS_S, nll)},
        counts={"samples": len(samples), "targets": len(arrays["probs"])},
        config={k: (manifest or {}).get(k) for k in ("dataset", "split_seed", "flags", "build")})


COLUMN_ORDER = ("PiP-noPlan", "PiP-noFusion", "PiP")


def report(models: dict[str, tuple[PipNet, dict]], samples: list[SceneSample],
           plan_source: str = "spline") -> dict:
    """Ablation-table report over shared samples; columns must share a split.

    models maps column name -> (model, manifest).  Returns a JSON-ready
    dict with a rendered text table under "text".
    """
    keys = {(m.get("dataset"), m.get("split_seed")) for _, m in models.values()}
    if len(keys) > 1:
        raise ValueError(f"checkpoints disagree on dataset/split: {sorted(keys)}")
    columns = [c for c in COLUMN_ORDER if c in models] + \
              [c for c in sorted(models) if c not in COLUMN_ORDER]
    per_col = {c: evaluate(models[c][0], samples, models[c][1], plan_source) for c in columns}

    rows = []
    for metric, attr in (("RMSE (m)", "rmse"), ("NLL (nats)", "nll")):
        for h in HORIZONS_S:
            rows.append({"metric": metric, "horizon_s": h,
                         **{c: round(getattr(per_col[c], attr)[h], 4) for c in columns}})

    width = max(12, *(len(c) + 2 for c in columns))
    lines = [f"{'metric':<12}{'t':>4}" + "".join(f"{c:>{width}}" for c in columns)]
    for r in rows:
        lines.append(f"{r['metric']:<12}{r['horizon_s']:>3}s"
                     + "".join(f"{r[c]:>{width}.4f}" for c in columns))
    return {
        "columns": columns,
        "rows": rows,
        "counts": per_col[columns[0]].counts,
        "config": {c: per_col[c].config for c in columns},
        "text": "\n".join(lines),
    }


def write_report(rep: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
        fh.write("\n")


__all__ = [
    "HORIZONS_S", "HORIZON_FRAMES", "horizon_rmse", "horizon_nll",
    "np_bivariate_log_density", "predict_arrays", "evaluate_rmse", "evaluate_nll",
    "evaluate", "EvalReport", "report", "write_report", "to_predictions",
]

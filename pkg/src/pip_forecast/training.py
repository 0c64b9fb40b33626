"""Training loop for the likelihood objective.

The loss is the per-target negative log likelihood under the true
maneuver, averaged over each sample's targets and then over the batch
(a scale choice; the optimum at fixed batch composition is unchanged).
Training always feeds the ego's actual future as the plan; the spline
refit is an evaluation-time restriction only.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from .batching import SceneBatch, collate
from .checkpoint import save_checkpoint
from .errors import ContractViolation
from .network import PipConfig, PipNet, config_from_preset, per_target_nll
from .scenes import SceneSample


class TrainingAbort(RuntimeError):
    pass


@dataclass
class TrainConfig:
    dataset: str = "unknown"
    split_seed: int = 0
    seed: int = 0
    batch_size: int = 64
    learning_rate: float = 1e-3
    lr_schedule: str = "constant"       # "constant" or "cosine" (decay to ~0)
    adam_beta2: float = 0.99            # 0.999 is too slow against sharp-sigma NLL spikes
    grad_clip: float = 10.0
    epochs: int = 10
    max_steps: int | None = None        # optional hard cap overriding epochs
    plan_source: str = "truth"
    preset: str = "desk"
    no_plan: bool = False
    no_fusion: bool = False
    checkpoint_every: int = 0           # steps; 0 = only final
    out_dir: str | None = None
    num_threads: int | None = None      # pin for strict single-worker determinism

    def model_config(self) -> PipConfig:
        return config_from_preset(self.preset, no_plan=self.no_plan, no_fusion=self.no_fusion)


@dataclass
class TrainResult:
    model: PipNet
    loss_curve: list[float]
    checkpoint_path: Path | None = None
    config: TrainConfig | None = None
    extras: dict = field(default_factory=dict)


def seed_everything(seed: int):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def batch_loss(model: PipNet, batch: SceneBatch) -> torch.Tensor:
    """Mean over samples of the per-sample target-average NLL."""
    if batch.n_targets == 0:
        p = next(model.parameters())
        return p.sum() * 0.0
    out = model(batch, maneuvers=batch.m_true.unsqueeze(1))
    per_target = per_target_nll(out, batch)
    per_sample = per_target.new_zeros(batch.n_samples)
    counts = per_target.new_zeros(batch.n_samples)
    per_sample.index_add_(0, batch.tgt_slot, per_target)
    counts.index_add_(0, batch.tgt_slot, torch.ones_like(per_target))
    return (per_sample / counts.clamp(min=1.0)).mean()


def _dump_nan_batch(cfg: TrainConfig, step: int, batch: SceneBatch) -> Path | None:
    if cfg.out_dir is None:
        return None
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"nan_batch_step{step}.pt"
    torch.save({"step": step, "scene_ids": batch.scene_ids, "hist": batch.hist,
                "plans": batch.plans, "truth": batch.truth, "m_true": batch.m_true}, path)
    return path


def train(cfg: TrainConfig, samples: list[SceneSample], *,
          log_every: int = 50, log_fn=print) -> TrainResult:
    """Minimize the likelihood loss; deterministic for a fixed seed."""
    if cfg.plan_source != "truth":
        raise ContractViolation("training must use the ego's actual future as the plan")
    if not samples:
        raise ContractViolation("no training samples")
    if cfg.num_threads:
        torch.set_num_threads(cfg.num_threads)
    seed_everything(cfg.seed)

    model = PipNet(cfg.model_config())
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                           betas=(0.9, cfg.adam_beta2))
    gen = torch.Generator().manual_seed(cfg.seed)

    steps_per_epoch = (len(samples) + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    if cfg.max_steps is not None:
        total_steps = min(total_steps, cfg.max_steps)

    if cfg.lr_schedule == "cosine":
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=total_steps)
    elif cfg.lr_schedule == "constant":
        sched = None
    else:
        raise ContractViolation(f"unknown lr schedule {cfg.lr_schedule!r}")

    loss_curve: list[float] = []
    step = 0
    done = False
    for _epoch in range(max(cfg.epochs, 1)):
        order = torch.randperm(len(samples), generator=gen).tolist()
        for k in range(0, len(order), cfg.batch_size):
            chunk = [samples[i] for i in order[k:k + cfg.batch_size]]
            batch = collate(chunk, plan_source=cfg.plan_source, grid=model.cfg.grid)
            loss = batch_loss(model, batch)
            if not torch.isfinite(loss):
                path = _dump_nan_batch(cfg, step, batch)
                raise TrainingAbort(
                    f"non-finite loss at step {step}"
                    + (f"; offending batch dumped to {path}" if path else ""))
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            if sched is not None:
                sched.step()
            loss_curve.append(float(loss.detach()))
            step += 1
            if log_fn is not None and log_every and step % log_every == 0:
                log_fn(f"step {step}/{total_steps}  loss {loss_curve[-1]:.4f}")
            if cfg.checkpoint_every and cfg.out_dir and step % cfg.checkpoint_every == 0:
                save_checkpoint(Path(cfg.out_dir) / f"step{step}.pt", model,
                                dataset=cfg.dataset, split_seed=cfg.split_seed,
                                train_info={"step": step, **asdict(cfg)})
            if step >= total_steps:
                done = True
                break
        if done:
            break

    model.eval()
    ckpt_path = None
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        ckpt_path = Path(cfg.out_dir) / "final.pt"
        save_checkpoint(ckpt_path, model, dataset=cfg.dataset, split_seed=cfg.split_seed,
                        train_info={"steps": step, **asdict(cfg)})
        with open(Path(cfg.out_dir) / "loss_curve.json", "w") as fh:
            json.dump(loss_curve, fh)
    return TrainResult(model=model, loss_curve=loss_curve,
                       checkpoint_path=ckpt_path, config=cfg)

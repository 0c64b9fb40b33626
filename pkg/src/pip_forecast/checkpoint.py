"""Versioned model checkpoints.

A checkpoint is a single file holding every parameter array plus a
manifest describing how to rebuild and interpret the model: network
widths, ablation flags, grid geometry, unit system, dataset/split
identity and a build string.  Loading dispatches on the manifest format
version so old files keep working when the layout evolves.
"""

from __future__ import annotations

import subprocess
from importlib import metadata
from pathlib import Path

import torch

from .network import PipConfig, PipNet

FORMAT_VERSION = 1


def build_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"git:{out.stdout.strip()}"
    except OSError:
        pass
    try:
        return f"pip-forecast:{metadata.version('pip-forecast')}"
    except metadata.PackageNotFoundError:
        return "pip-forecast:unknown"


def save_checkpoint(path: str | Path, model: PipNet, *, dataset: str = "unknown",
                    split_seed: int = 0, train_info: dict | None = None):
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": model.cfg.as_dict(),
        "grid": model.cfg.grid.as_dict(),
        "units": {"length": "m", "time": "s", "frame_period_s": 0.2},
        "dataset": dataset,
        "split_seed": split_seed,
        "flags": {"no_plan": model.cfg.no_plan, "no_fusion": model.cfg.no_fusion},
        "build": build_string(),
        "train": train_info or {},
    }
    torch.save({"manifest": manifest, "state_dict": model.state_dict()}, path)


def _load_v1(payload: dict) -> tuple[PipNet, dict]:
    manifest = payload["manifest"]
    model = PipNet(PipConfig.from_dict(manifest["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, manifest


_LOADERS = {1: _load_v1}


def load_checkpoint(path: str | Path) -> tuple[PipNet, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("manifest", {}).get("format_version")
    if version not in _LOADERS:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    return _LOADERS[version](payload)

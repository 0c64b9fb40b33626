"""Planning-conditioned interaction network.

Per target, three encoding streams are merged: the target's own dynamics,
a convolutional pooling over neighbors' history encodings scattered into
the target-centric grid, and (in parallel, through its own convolution
stack) the controlled vehicle's future plan scattered into the same
geometry.  Targets are then placed into the ego-centric grid and coupled
through a symmetric fully-convolutional encoder-decoder with summed skip
connections, and each fused target encoding is decoded into six maneuver
modes: two softmax heads (lateral x longitudinal) plus, per mode, 25
bivariate Gaussian displacement steps emitted by an LSTM.

Ablations are structural: ``no_plan`` builds a model without the plan
encoder/branch, ``no_fusion`` replaces the fusion pass with a per-target
linear projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .errors import ContractViolation
from .grid import GridSpec
from .scenes import T_OBS, T_PRED

SIGMA_FLOOR = 1e-3    # meters; density evaluation floor
RHO_CLAMP = 0.999
PROB_FLOOR = 1e-12

# Fixed meters->network input scale, per axis.  Relative coordinates span
# tens of meters longitudinally (a plan reaches ~150 m past a rear target)
# but only a few meters laterally, where one lane width carries most of the
# behavioral meaning; feeding raw meters saturates the recurrent gates at
# init and leaves lateral structure ~30x fainter than longitudinal.
INPUT_SCALE = (0.05, 0.3)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PipConfig:
    """Network widths and ablation flags.

    Defaults follow the convolutional-social-pooling lineage and keep
    desk-scale training cheap; none of the widths is canonical.
    """

    embed_dim: int = 32
    enc_dim: int = 64
    dyn_dim: int = 32
    social_channels: tuple[int, int] = (64, 16)
    fusion_channels: tuple[int, int] = (128, 256)
    fused_dim: int = 128
    dec_dim: int = 128
    no_plan: bool = False
    no_fusion: bool = False
    grid: GridSpec = field(default_factory=GridSpec)

    @property
    def social_rows(self) -> int:
        rows = self.grid.rows - 4        # two valid 3x3 convs
        return (rows // 2) // 2          # branch pool then merge pool, both (2,1)

    @property
    def social_dim(self) -> int:
        branches = 1 if self.no_plan else 2
        return branches * self.social_channels[1] * self.social_rows

    @property
    def target_dim(self) -> int:
        return self.social_dim + self.dyn_dim

    def as_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim, "enc_dim": self.enc_dim, "dyn_dim": self.dyn_dim,
            "social_channels": list(self.social_channels),
            "fusion_channels": list(self.fusion_channels),
            "fused_dim": self.fused_dim, "dec_dim": self.dec_dim,
            "no_plan": self.no_plan, "no_fusion": self.no_fusion,
            "grid": self.grid.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipConfig":
        d = dict(d)
        d["social_channels"] = tuple(d["social_channels"])
        d["fusion_channels"] = tuple(d["fusion_channels"])
        d["grid"] = GridSpec(**d["grid"])
        return cls(**d)


# Small named presets; tests and the synthetic benchmark use "desk".
PRESETS = {
    "paper": dict(),
    "desk": dict(embed_dim=16, enc_dim=32, dyn_dim=16, social_channels=(32, 16),
                 fusion_channels=(32, 64), fused_dim=32, dec_dim=64),
    "mini": dict(embed_dim=4, enc_dim=8, dyn_dim=4, social_channels=(2, 2),
                 fusion_channels=(4, 8), fused_dim=4, dec_dim=8),
}


def config_from_preset(name: str, **overrides) -> PipConfig:
    if name not in PRESETS:
        raise ContractViolation(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    kw = dict(PRESETS[name])
    kw.update(overrides)
    return PipConfig(**kw)


class TargetFusion(nn.Module):
    """Symmetric FCN over the ego-centric target grid.

    Two stride-2 downsamples on the row axis, mirrored by transposed
    convolutions; skip connections combine by element-wise sum; lateral
    size is preserved by symmetric padding.  Output spatial shape equals
    the input 25x5.  A 1x1 input-to-output bypass lets each cell keep its
    own encoding from step one while the encoder-decoder path learns the
    cross-target corrections; without it the deep path has to relearn the
    identity before fusion can contribute at all.
    """

    def __init__(self, in_dim: int, f1: int, f2: int, out_dim: int):
        super().__init__()
        self.conv_in = nn.Conv2d(in_dim, f1, 3, padding=1)
        self.down1 = nn.Conv2d(f1, f2, 3, stride=(2, 1), padding=1)
        self.down2 = nn.Conv2d(f2, f2, 3, stride=(2, 1), padding=1)
        self.up1 = nn.ConvTranspose2d(f2, f2, 3, stride=(2, 1), padding=1)
        self.up2 = nn.ConvTranspose2d(f2, f1, 3, stride=(2, 1), padding=1)
        self.conv_out = nn.Conv2d(f1, out_dim, 3, padding=1)
        self.bypass = nn.Conv2d(in_dim, out_dim, 1)
        self.act = nn.LeakyReLU(0.1)
        # start bypass-dominated: a loud random deep path can bury the
        # per-target encodings for the whole early phase of training
        with torch.no_grad():
            self.conv_out.weight.mul_(0.1)
            self.conv_out.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        e0 = self.act(self.conv_in(x))
        e1 = self.act(self.down1(e0))
        e2 = self.act(self.down2(e1))
        u1 = self.act(self.up1(e2) + e1)
        u2 = self.act(self.up2(u1) + e0)
        return self.conv_out(u2) + self.bypass(x)


class PipNet(nn.Module):
    def __init__(self, cfg: PipConfig):
        super().__init__()
        if cfg.grid.cols != 5 or cfg.grid.rows != 25:
            raise ContractViolation("network geometry is tied to the 25x5 grid")
        self.cfg = cfg
        self.act = nn.LeakyReLU(0.1)

        self.embed = nn.Conv1d(2, cfg.embed_dim, 3, padding=1)
        self.enc_hist = nn.LSTM(cfg.embed_dim, cfg.enc_dim, batch_first=True)
        self.dyn = nn.Linear(cfg.enc_dim, cfg.dyn_dim)

        c1, c2 = cfg.social_channels
        self.soc_obs = self._social_branch(c1, c2)
        if not cfg.no_plan:
            self.enc_plan = nn.LSTM(cfg.embed_dim, cfg.enc_dim, batch_first=True)
            self.soc_plan = self._social_branch(c1, c2)
        self.merge_pool = nn.MaxPool2d((2, 1))

        f1, f2 = cfg.fusion_channels
        if cfg.no_fusion:
            self.fusion_proj = nn.Linear(cfg.target_dim, cfg.fused_dim)
        else:
            self.fusion = TargetFusion(cfg.target_dim, f1, f2, cfg.fused_dim)

        def head(n_out: int) -> nn.Sequential:
            return nn.Sequential(nn.Linear(cfg.fused_dim, cfg.fused_dim), nn.LeakyReLU(0.1),
                                 nn.Linear(cfg.fused_dim, n_out))

        self.lat_head = head(3)
        self.lon_head = head(2)
        self.dec = nn.LSTM(cfg.fused_dim + 5, cfg.dec_dim, batch_first=True)
        self.dec_out = nn.Linear(cfg.dec_dim, 5)

    def _social_branch(self, c1: int, c2: int) -> nn.Sequential:
        return nn.Sequential(
            nn.Conv2d(self.cfg.enc_dim, c1, 3), nn.LeakyReLU(0.1),
            nn.Conv2d(c1, c2, 3), nn.LeakyReLU(0.1),
            nn.MaxPool2d((2, 1)),
        )

    # --- trajectory encoding --------------------------------------------

    def embed_trajectory(self, points: torch.Tensor) -> torch.Tensor:
        """Per-step motion embedding; same-padded, so output length = input length."""
        if points.shape[-2] < 3:
            raise ContractViolation("trajectory shorter than the embedding kernel")
        scale = points.new_tensor(INPUT_SCALE)
        x = self.act(self.embed((points * scale).transpose(-1, -2)))
        return x.transpose(-1, -2)

    def encode_history(self, points: torch.Tensor) -> torch.Tensor:
        if points.shape[-2] != T_OBS:
            raise ContractViolation(f"history encoder expects {T_OBS} steps")
        _, (h, _) = self.enc_hist(self.embed_trajectory(points))
        return h.squeeze(0)

    def encode_planning(self, points: torch.Tensor) -> torch.Tensor:
        """Encode the plan back-to-front so the near future dominates the state."""
        if self.cfg.no_plan:
            raise ContractViolation("no_plan model has no planning encoder")
        if points.shape[-2] != T_PRED:
            raise ContractViolation(f"planning encoder expects {T_PRED} steps")
        _, (h, _) = self.enc_plan(self.embed_trajectory(points.flip(-2)))
        return h.squeeze(0)

    # --- per-target social pooling ---------------------------------------

    def _scatter_grid(self, values: torch.Tensor, slots: torch.Tensor,
                      cells: torch.Tensor, n_grids: int) -> torch.Tensor:
        g = self.cfg.grid
        out = values.new_zeros((n_grids, values.shape[-1], g.rows, g.cols))
        if len(slots):
            out[slots, :, cells[:, 0], cells[:, 1]] = values
        return out

    def encode_targets(self, batch) -> torch.Tensor:
        """Per-target encodings (social + dynamics) for a collated batch."""
        n = batch.n_targets
        h_all = self.encode_history(batch.hist)
        h_cent, h_nbr = h_all[:n], h_all[n:]

        obs = self._scatter_grid(h_nbr, batch.nbr_slot, batch.nbr_cell, n)
        pooled = self.soc_obs(obs)
        if not self.cfg.no_plan:
            h_plan = self.encode_planning(batch.plans)
            valid = batch.plan_valid
            plan_grid = self._scatter_grid(h_plan[valid], torch.nonzero(valid).squeeze(-1),
                                           batch.plan_cell[valid], n)
            pooled = torch.cat([pooled, self.soc_plan(plan_grid)], dim=1)
        social = self.merge_pool(pooled).flatten(1)
        dyn = self.act(self.dyn(h_cent))
        return torch.cat([social, dyn], dim=1)

    # --- target fusion ----------------------------------------------------

    def fuse_targets(self, target_grid: torch.Tensor) -> torch.Tensor:
        g = self.cfg.grid
        if target_grid.shape[-2:] != (g.rows, g.cols):
            raise ContractViolation(
                f"target grid must be {g.rows}x{g.cols}, got {tuple(target_grid.shape[-2:])}")
        if self.cfg.no_fusion:
            raise ContractViolation("no_fusion model bypasses the fusion pass")
        return self.fusion(target_grid)

    def fused_encodings(self, batch, targets: torch.Tensor) -> torch.Tensor:
        if self.cfg.no_fusion:
            return self.fusion_proj(targets)
        grid = self._scatter_grid(targets, batch.tgt_slot, batch.tgt_cell, batch.n_samples)
        fused = self.fuse_targets(grid)
        return fused[batch.tgt_slot, :, batch.tgt_cell[:, 0], batch.tgt_cell[:, 1]]

    # --- maneuver decoding --------------------------------------------------

    def maneuver_probs(self, fused: torch.Tensor):
        lat = torch.softmax(self.lat_head(fused), dim=-1)
        lon = torch.softmax(self.lon_head(fused), dim=-1)
        joint = (lat.unsqueeze(-1) * lon.unsqueeze(-2)).flatten(-2)   # slot 2a+b
        return lat, lon, joint

    def decode_trajectory(self, fused: torch.Tensor, maneuvers: torch.Tensor,
                          cv_step: torch.Tensor | None = None):
        """Decode Gaussian displacement steps for given maneuver slots.

        fused: (N, fused_dim); maneuvers: (N, Q) integer slots in 0..5.
        The network regresses residuals around a constant-velocity
        continuation (cv_step, the last observed per-frame displacement);
        the returned delta is the full displacement.  Returns
        (delta, sigma, rho) of shapes (N, Q, T, 2/2/-).
        """
        n, q = maneuvers.shape
        lat_onehot = torch.nn.functional.one_hot(maneuvers // 2, 3).to(fused.dtype)
        lon_onehot = torch.nn.functional.one_hot(maneuvers % 2, 2).to(fused.dtype)
        feat = torch.cat([fused.unsqueeze(1).expand(-1, q, -1), lat_onehot, lon_onehot], dim=-1)
        steps = feat.reshape(n * q, 1, -1).expand(-1, T_PRED, -1)
        out, _ = self.dec(steps)
        raw = self.dec_out(out).reshape(n, q, T_PRED, 5)
        delta = raw[..., 0:2]
        if cv_step is not None:
            delta = delta + cv_step.reshape(n, 1, 1, 2)
        sigma = torch.exp(raw[..., 2:4])
        rho = torch.tanh(raw[..., 4])
        return delta, sigma, rho

    def forward(self, batch, maneuvers: torch.Tensor | str = "all") -> "NetOutput":
        if batch.n_targets == 0:
            z = self.dyn.weight.new_zeros
            return NetOutput(z((0, 3)), z((0, 2)), z((0, 6)), z((0, 0, T_PRED, 2)),
                             z((0, 0, T_PRED, 2)), z((0, 0, T_PRED)),
                             torch.zeros((0, 0), dtype=torch.long))
        if not self.cfg.no_plan and batch.plans.shape[-2] != T_PRED:
            raise ContractViolation(f"plan must have {T_PRED} points")
        targets = self.encode_targets(batch)
        fused = self.fused_encodings(batch, targets)
        lat, lon, joint = self.maneuver_probs(fused)
        if isinstance(maneuvers, str):
            if maneuvers != "all":
                raise ContractViolation("maneuvers must be 'all' or an index tensor")
            man = torch.arange(6, device=fused.device).expand(batch.n_targets, -1)
        else:
            man = maneuvers if maneuvers.dim() == 2 else maneuvers.unsqueeze(-1)
        # mean per-frame displacement over the observed window, in the
        # target's own frame (averaging the full history keeps observation
        # noise out of the constant-velocity continuation)
        n = batch.n_targets
        cv_step = -batch.hist[:n, 0, :] / (batch.hist.shape[1] - 1)
        delta, sigma, rho = self.decode_trajectory(fused, man, cv_step=cv_step)
        return NetOutput(lat, lon, joint, delta, sigma, rho, man)


@dataclass
class NetOutput:
    lat: torch.Tensor        # (N, 3)
    lon: torch.Tensor        # (N, 2)
    joint: torch.Tensor      # (N, 6), slot 2*lat + lon
    delta: torch.Tensor      # (N, Q, T, 2)
    sigma: torch.Tensor      # (N, Q, T, 2)
    rho: torch.Tensor        # (N, Q, T)
    maneuvers: torch.Tensor  # (N, Q) decoded slots


# --- math shared by loss and metrics ----------------------------------------


def integrate_displacements(last_observed, deltas):
    """Accumulate per-step displacements onto the last observed position.

    Works for torch tensors and numpy arrays; deltas has shape (..., T, 2)
    and last_observed broadcasts against (..., 2).
    """
    if isinstance(deltas, torch.Tensor):
        csum = torch.cumsum(deltas, dim=-2)
        last = last_observed if isinstance(last_observed, torch.Tensor) \
            else torch.as_tensor(last_observed, dtype=deltas.dtype)
        return last.unsqueeze(-2) + csum
    csum = np.cumsum(np.asarray(deltas, dtype=float), axis=-2)
    return np.asarray(last_observed, dtype=float)[..., None, :] + csum


def bivariate_log_density(mu, sigma, rho, y):
    """Log density of y under a bivariate Gaussian, shapes (..., 2)/(...,).

    sigma is floored at 1e-3 m and rho clamped to +/-0.999 to keep the
    log finite; both bounds are documented behavior, not silent fixes.
    """
    sx = torch.clamp(sigma[..., 0], min=SIGMA_FLOOR)
    sy = torch.clamp(sigma[..., 1], min=SIGMA_FLOOR)
    r = torch.clamp(rho, min=-RHO_CLAMP, max=RHO_CLAMP)
    dx = (y[..., 0] - mu[..., 0]) / sx
    dy = (y[..., 1] - mu[..., 1]) / sy
    one_m_r2 = 1.0 - r * r
    z = dx * dx + dy * dy - 2.0 * r * dx * dy
    return -(LOG_2PI + torch.log(sx) + torch.log(sy) + 0.5 * torch.log(one_m_r2)) \
        - z / (2.0 * one_m_r2)


def nll_loss(delta, sigma, rho, man_probs, m_true, truth):
    """Total negative log likelihood under the true maneuver (a sum, not a mean).

    delta/sigma: (N, T, 2) already selected at the true maneuver;
    rho: (N, T); man_probs: (N, 6); m_true: (N,) slots; truth: (N, T, 2)
    futures relative to each target's last observed position.
    """
    if delta.shape[0] == 0:
        return delta.new_zeros(())
    if (sigma <= 0).any():
        raise ContractViolation("sigma must be strictly positive before the density")
    if (rho.abs() >= 1).any():
        raise ContractViolation("|rho| must be < 1 before the density")
    mu = integrate_displacements(delta.new_zeros(delta.shape[0], 2), delta)
    log_traj = bivariate_log_density(mu, sigma, rho, truth).sum(dim=-1)
    p_true = man_probs.gather(1, m_true.unsqueeze(1)).squeeze(1)
    log_man = torch.log(torch.clamp(p_true, min=PROB_FLOOR))
    return -(log_traj + log_man).sum()


def per_target_nll(out: NetOutput, batch) -> torch.Tensor:
    """Per-target Eq-style NLL for a batch decoded at the true maneuvers."""
    if batch.n_targets == 0:
        return out.joint.new_zeros((0,))
    if out.maneuvers.shape[1] != 1:
        raise ContractViolation("per_target_nll expects a single decoded maneuver per target")
    delta, sigma, rho = out.delta[:, 0], out.sigma[:, 0], out.rho[:, 0]
    mu = integrate_displacements(delta.new_zeros(delta.shape[0], 2), delta)
    log_traj = bivariate_log_density(mu, sigma, rho, batch.truth).sum(dim=-1)
    p_true = out.joint.gather(1, batch.m_true.unsqueeze(1)).squeeze(1)
    return -(log_traj + torch.log(torch.clamp(p_true, min=PROB_FLOOR)))


# --- prediction containers ----------------------------------------------------


@dataclass
class TargetPrediction:
    """Decoded distribution for one target: 6 modes x 25 Gaussian steps."""

    target_id: int
    probs: np.ndarray        # (6,)
    delta: np.ndarray        # (6, 25, 2)
    sigma: np.ndarray        # (6, 25, 2)
    rho: np.ndarray          # (6, 25)
    mu: np.ndarray           # (6, 25, 2) absolute means via displacement integration

    def __post_init__(self):
        if abs(float(self.probs.sum()) - 1.0) > 1e-6:
            raise ContractViolation("maneuver probabilities must sum to 1")
        if self.delta.shape != (6, T_PRED, 2):
            raise ContractViolation("prediction must cover 6 maneuvers x 25 steps")

    @property
    def argmax_maneuver(self) -> int:
        return int(np.argmax(self.probs))

    @property
    def best_mean(self) -> np.ndarray:
        return self.mu[self.argmax_maneuver]


def to_predictions(batch, out: NetOutput) -> list[list[TargetPrediction]]:
    """Convert a forward pass into per-sample lists of target predictions."""
    if out.maneuvers.shape[-1] != 6:
        raise ContractViolation("prediction sets need all six maneuvers decoded")
    joint = out.joint.detach().cpu().numpy()
    delta = out.delta.detach().cpu().numpy()
    sigma = out.sigma.detach().cpu().numpy()
    rho = out.rho.detach().cpu().numpy()
    grouped: list[list[TargetPrediction]] = [[] for _ in range(batch.n_samples)]
    for i in range(batch.n_targets):
        mu = integrate_displacements(batch.last_pos_abs[i], delta[i])
        grouped[int(batch.tgt_slot[i])].append(TargetPrediction(
            target_id=batch.target_ids[i], probs=joint[i], delta=delta[i],
            sigma=sigma[i], rho=rho[i], mu=mu))
    return grouped

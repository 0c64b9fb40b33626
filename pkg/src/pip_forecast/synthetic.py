"""Scripted interactive scenarios for desk-scale benchmarks.

Each scenario is a 3-lane highway snippet at 5 Hz, 41 frames (3 s history
plus 5 s future), with the controlled vehicle ahead of one or two
followers in the middle lane.  Histories are constant-speed for everyone,
so nothing in the observable past predicts what happens next; the future
is scripted by one rule: a follower decelerates at 2 m/s^2 exactly when
the controlled vehicle's future trajectory cuts into its lane ahead of it
with less than a 1.5 s time gap (against the follower's coasting
projection), otherwise it holds speed.  A triggered follower brakes until
its time gap to the merging vehicle is safe again and then holds the new
speed, so braking depth varies continuously with the geometry; futures
cannot be explained by a single canned deceleration profile, which keeps
the plan pathway load-bearing during likelihood training.  In chain
scenes a second follower mirrors the first's braking with a 0.6 s delay.

Because the deciding signal lives entirely in the ego's future, a
predictor that sees candidate plans can resolve the outcome while a
history-only predictor must hedge between braking and coasting.

Positions carry iid observation noise (default 15 cm, roughly tracking
accuracy).  Noise-free scripts are degenerate for likelihood training:
the density has no floor, sigma collapses indefinitely and the resulting
gradients swamp every other loss term.  The geometry margins are chosen
so the noise can never flip the cut-in rule itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .scenes import SceneSample, build_samples
from .tracks import TrackTable

LANE_WIDTH = 3.7
N_LANES = 3
FRAME_DT = 0.2
N_FRAMES = 41          # 16 history (current included) + 25 future
CURRENT = 15           # array index of the current frame'
BRAKE_DECEL = 2.0      # m/s^2
CHAIN_DELAY_S = 0.6
TIME_GAP_S = 1.5

EGO_ID, F1_ID, F2_ID = 1, 2, 3

NOISE_STD = 0.15   # observation noise on every coordinate [m]


def lane_center(lane: int) -> float:
    return (lane - 0.5) * LANE_WIDTH


def lane_of(y: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(y) / LANE_WIDTH).astype(int) + 1, 1, N_LANES)


def plan_triggers_brake(plan_points: np.ndarray, follower_x: float, follower_v: float,
                        follower_lane: int, time_gap_s: float = TIME_GAP_S) -> bool:
    """The scripted yield rule, reusable as a test oracle.

    True when some future plan point lies inside the follower's lane,
    ahead of the follower's coasting position, with a time gap below the
    threshold.
    """
    plan_points = np.asarray(plan_points, dtype=float)
    tau = FRAME_DT * np.arange(1, len(plan_points) + 1)
    in_lane = np.abs(plan_points[:, 1] - lane_center(follower_lane)) < LANE_WIDTH / 2.0
    gap = plan_points[:, 0] - (follower_x + follower_v * tau)
    tight = (gap > 0) & (gap < time_gap_s * max(follower_v, 1e-6))
    return bool(np.any(in_lane & tight))


def _quintic_ease(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    return 10 * s ** 3 - 15 * s ** 4 + 6 * s ** 5


def _yield_profile(x0: float, v: float, tau: np.ndarray, lead_x: np.ndarray,
                   lead_x0: float, delay: float = 0.0,
                   safe_gap_s: float = TIME_GAP_S) -> np.ndarray:
    """Brake at BRAKE_DECEL whenever the time gap to the lead is unsafe.

    lead_x gives the lead vehicle's longitudinal position at each tau
    (lead_x0 at the current frame).  Braking stops as soon as the gap is
    safe again, so the speed shed depends on the whole geometry and no two
    scenes produce the same canned profile.  The unsafe check looks one
    frame ahead under coasting, which makes "this profile decelerates at
    least once" coincide exactly with the coasting-projection trigger.
    """
    x = np.empty_like(tau)
    pos, speed = x0, v
    prev_t, prev_lead = 0.0, lead_x0
    for i, t in enumerate(tau):
        dt = t - prev_t
        gap_now = prev_lead - pos
        gap_ahead = lead_x[i] - (pos + speed * dt)
        unsafe = min(gap_now, gap_ahead) < safe_gap_s * speed
        if t > delay and unsafe and speed > 0:
            new_speed = max(speed - BRAKE_DECEL * dt, 0.0)
            pos += (speed + new_speed) / 2.0 * dt
            speed = new_speed
        else:
            pos += speed * dt
        x[i] = pos
        prev_t, prev_lead = t, lead_x[i]
    return x


@dataclass
class YieldMeta:
    scenario_id: str
    cutin: bool
    brake: bool
    chain: bool
    follower_speed: float
    gap: float
    duration: float     # lane-change duration when cutting in


def generate_yield_table(rng: np.random.Generator, index: int,
                         recording_prefix: str = "yield",
                         noise_std: float = NOISE_STD,
                         chain_prob: float = 0.4) -> tuple[TrackTable, YieldMeta]:
    """Script one scenario as a 5 Hz TrackTable."""
    chain = rng.random() < chain_prob
    cutin = rng.random() < 0.5
    wide = cutin and not chain and rng.random() < 0.3

    if wide:
        v = float(rng.uniform(15.0, 18.0))
        gap = float(rng.uniform(1.5 * v + 1.0, 29.0))
    else:
        v = float(rng.uniform(15.0, 24.0))
        gap = float(rng.uniform(6.0, 16.0 if chain else 18.0))
    gap2 = float(rng.uniform(7.0, 11.0))
    v_ego = v + float(rng.uniform(-1.0, 1.0))
    duration = float(rng.choice([2.5, 3.5, 4.5]))
    ego_lane = int(rng.choice([1, 3]))

    tau = FRAME_DT * (np.arange(N_FRAMES) - CURRENT)     # negative in history
    x_ego0 = 100.0

    # Ego: constant speed; lateral ease into the middle lane over `duration`.
    x_ego = x_ego0 + v_ego * tau
    y_ego = np.full(N_FRAMES, lane_center(ego_lane))
    if cutin:
        shift = lane_center(2) - lane_center(ego_lane)
        future = tau > 0
        y_ego[future] += shift * _quintic_ease(tau[future] / duration)

    # The reaction rule is evaluated on the ego's scripted future, so the
    # "brakes iff the plan cuts in tightly" equivalence holds by construction.
    f1_x0 = x_ego0 - gap
    plan = np.stack([x_ego[CURRENT + 1:], y_ego[CURRENT + 1:]], axis=1)
    brake = plan_triggers_brake(plan, f1_x0, v, follower_lane=2)

    x_f1 = f1_x0 + v * tau
    if brake:
        fut = tau > 0
        x_f1[fut] = _yield_profile(f1_x0, v, tau[fut], lead_x=x_ego[fut],
                                   lead_x0=x_ego[CURRENT])
    y_f1 = np.full(N_FRAMES, lane_center(2))

    rows = {
        "frame": np.tile(np.arange(N_FRAMES), 3 if chain else 2),
        "vehicle_id": np.repeat([EGO_ID, F1_ID, F2_ID][: 3 if chain else 2], N_FRAMES),
    }
    xs = [x_ego, x_f1]
    ys = [y_ego, y_f1]
    if chain:
        f2_x0 = f1_x0 - gap2
        x_f2 = f2_x0 + v * tau
        if brake:
            # the second follower yields to the first, a beat later and
            # with the tighter gap tolerance of car following
            fut = tau > 0
            x_f2[fut] = _yield_profile(f2_x0, v, tau[fut], lead_x=x_f1[fut],
                                       lead_x0=x_f1[CURRENT],
                                       delay=CHAIN_DELAY_S, safe_gap_s=1.0)
        xs.append(x_f2)
        ys.append(np.full(N_FRAMES, lane_center(2)))

    x = np.concatenate(xs)
    y = np.concatenate(ys)
    lanes = lane_of(y)          # lane ids from the noise-free script
    if noise_std > 0:
        x = x + rng.normal(0.0, noise_std, x.shape)
        y = y + rng.normal(0.0, noise_std, y.shape)
    frames = pd.DataFrame({**rows, "x": x, "y": y, "lane_id": lanes})
    rec_id = f"{recording_prefix}-{index:05d}"
    table = TrackTable(recording_id=rec_id,
                       frames=frames.sort_values(["vehicle_id", "frame"]).reset_index(drop=True),
                       rate_hz=5)
    meta = YieldMeta(scenario_id=rec_id, cutin=cutin, brake=brake, chain=chain,
                     follower_speed=v, gap=gap, duration=duration)
    return table, meta


def generate_yield_benchmark(n: int, seed: int = 0, recording_prefix: str = "yield",
                             noise_std: float = NOISE_STD,
                             chain_prob: float = 0.4) -> tuple[list[SceneSample], list[YieldMeta]]:
    """Generate n scenarios and cut them into one SceneSample each."""
    rng = np.random.default_rng(seed)
    samples, metas = [], []
    for i in range(n):
        table, meta = generate_yield_table(rng, i, recording_prefix, noise_std, chain_prob)
        cut, _report = build_samples(table, ego_ids=[EGO_ID])
        if len(cut) != 1:
            raise RuntimeError(f"scenario {meta.scenario_id} produced {len(cut)} samples")
        samples.append(cut[0])
        metas.append(meta)
    return samples, metas

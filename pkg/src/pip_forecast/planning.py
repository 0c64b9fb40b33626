"""Candidate-plan machinery.

Plans live on a 5 s horizon and are represented the same way the
prediction input expects them: a per-axis degree-5 polynomial fitted
through six 1 Hz waypoints (t = 0..5 s including the current position),
sampled back to 25 points at 5 Hz.  Candidate generation composes simple
kinematic profiles (constant-acceleration longitudinal, quintic-ease
lateral) over a small behavior menu; it reproduces the interface of a
behavior-diverse vehicle planner, not any particular planner's internals.

Fitting is exact interpolation: six knots, six coefficients, square
system.  No smoothing is applied, so a refit of a clipped kinematic
profile may overshoot between knots by a few centimeters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DataError
from .scenes import T_PRED, FRAME_DT, TrajectorySegment

PLAN_HORIZON_S = 5.0
KNOT_TIMES = np.arange(6, dtype=float)          # 0..5 s at 1 Hz
SAMPLE_TIMES = FRAME_DT * np.arange(1, T_PRED + 1)   # 0.2..5.0 s

ACCEL_PROFILES = {"accelerate": 1.0, "maintain": 0.0, "decelerate": -1.5}  # m/s^2
LATERAL_BEHAVIORS = ("keep", "left", "right")
AGGRESSIVENESS_RANGE = (2.0, 5.0)   # lane-change duration bounds [s]
DEFAULT_DURATIONS = (2.5, 3.5, 4.5)

EGO_FOOTPRINT = (5.0, 2.0)          # length x width [m]


@dataclass
class QuinticSpline:
    """Per-axis degree-5 polynomial over t in [0, 5] s; coeffs (2, 6), a0..a5."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (2, 6):
            raise ContractViolation(f"quintic coeffs must be (2, 6), got {self.coeffs.shape}")
        if not np.isfinite(self.coeffs).all():
            raise ContractViolation("non-finite quintic coefficients")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        powers = t[..., None] ** np.arange(6)
        return powers @ self.coeffs.T      # (..., 2)

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.arange(1, 6)
        powers = k * t[..., None] ** (k - 1)
        return powers @ self.coeffs[:, 1:].T


def fit_quintic(waypoints: np.ndarray, times: np.ndarray = KNOT_TIMES) -> QuinticSpline:
    """Fit the unique degree-5 interpolant through six (x, y) waypoints."""
    waypoints = np.asarray(waypoints, dtype=float)
    times = np.asarray(times, dtype=float)
    if waypoints.shape != (6, 2):
        raise ContractViolation(f"need exactly six 2D waypoints, got {waypoints.shape}")
    if times.shape != (6,):
        raise ContractViolation("need exactly six knot times")
    if len(np.unique(times)) != 6:
        raise DataError("duplicate waypoint timestamps make the fit singular")
    vander = times[:, None] ** np.arange(6)
    coeffs = np.linalg.solve(vander, waypoints)    # (6, 2)
    return QuinticSpline(coeffs.T)


def sample_spline(spline: QuinticSpline, hz: int = 5, vehicle_id: int = 0) -> TrajectorySegment:
    """Evaluate a plan spline at the 5 Hz prediction frames (0.2..5.0 s)."""
    if hz != 5:
        raise ContractViolation("plans are sampled at the canonical 5 Hz")
    return TrajectorySegment(vehicle_id, spline(SAMPLE_TIMES), t0_frame=1)


@dataclass
class CandidatePlan:
    lateral: str
    longitudinal: str
    aggressiveness: float          # lane-change duration [s]
    spline: QuinticSpline
    trajectory: TrajectorySegment  # 25 points sampled from the spline (authoritative)
    knots: np.ndarray              # (6, 2) provenance waypoints

    @property
    def behavior(self) -> tuple[str, str]:
        return (self.lateral, self.longitudinal)


def _quintic_ease(s: np.ndarray) -> np.ndarray:
    """Smoothstep with zero velocity and acceleration at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return 10 * s ** 3 - 15 * s ** 4 + 6 * s ** 5


def _longitudinal_profile(t: np.ndarray, speed: float, accel: float) -> np.ndarray:
    """Constant-acceleration displacement with speed clipped at zero."""
    if accel >= 0 or speed + accel * t.max() >= 0:
        return speed * t + 0.5 * accel * t ** 2
    t_stop = speed / -accel
    moving = np.minimum(t, t_stop)
    return speed * moving + 0.5 * accel * moving ** 2


def _lateral_profile(t: np.ndarray, offset: float, duration: float) -> np.ndarray:
    return offset * _quintic_ease(t / duration)


def generate_candidates(position, velocity: float, lane_width: float,
                        lateral_menu=LATERAL_BEHAVIORS,
                        longitudinal_menu=tuple(ACCEL_PROFILES),
                        aggressiveness=DEFAULT_DURATIONS,
                        left_sign: float = 1.0) -> list[CandidatePlan]:
    """Roll out one plan per (lateral, longitudinal, aggressiveness) combination.

    Lateral behaviors ease to exactly +/- one lane width over the
    aggressiveness duration and then hold; longitudinal behaviors apply a
    fixed acceleration with speed floored at zero.  left_sign sets which y
    direction "left" means for the dataset at hand.
    """
    position = np.asarray(position, dtype=float)
    if velocity < 0:
        raise ContractViolation("candidate generation needs a nonnegative speed")
    if not lateral_menu or not longitudinal_menu or not len(aggressiveness):
        raise ContractViolation("empty behavior menu")
    for name in lateral_menu:
        if name not in LATERAL_BEHAVIORS:
            raise ContractViolation(f"unknown lateral behavior {name!r}")
    for name in longitudinal_menu:
        if name not in ACCEL_PROFILES:
            raise ContractViolation(f"unknown longitudinal behavior {name!r}")
    for dur in aggressiveness:
        if not AGGRESSIVENESS_RANGE[0] <= dur <= AGGRESSIVENESS_RANGE[1]:
            raise ContractViolation(f"lane-change duration {dur} s outside {AGGRESSIVENESS_RANGE}")

    offsets = {"keep": 0.0, "left": left_sign * lane_width, "right": -left_sign * lane_width}
    plans = []
    for lat in lateral_menu:
        for lon in longitudinal_menu:
            for dur in aggressiveness:
                dx = _longitudinal_profile(KNOT_TIMES, velocity, ACCEL_PROFILES[lon])
                dy = _lateral_profile(KNOT_TIMES, offsets[lat], dur)
                knots = position + np.stack([dx, dy], axis=1)
                spline = fit_quintic(knots)
                plans.append(CandidatePlan(
                    lateral=lat, longitudinal=lon, aggressiveness=float(dur),
                    spline=spline, trajectory=sample_spline(spline), knots=knots))
    return plans


@dataclass
class CollisionReport:
    pairs: list[tuple[int, int, tuple[float, float]]]   # (target id, first frame, point)
    clear: bool

    def __post_init__(self):
        if self.clear != (len(self.pairs) == 0):
            raise ContractViolation("collision report clear flag inconsistent with pairs")


def collision_check(plan_points: np.ndarray,
                    target_means: list[tuple[int, np.ndarray]],
                    footprint: tuple[float, float] = EGO_FOOTPRINT) -> CollisionReport:
    """Axis-aligned rectangle overlap between a plan and predicted means.

    Both vehicles use the same footprint; centers closer than the summed
    half extents on both axes at any of the 25 future frames collide.
    Heading-aware polygons are overkill in a road frame where headings
    stay near-axis.
    """
    plan_points = np.asarray(plan_points, dtype=float)
    if plan_points.shape != (T_PRED, 2):
        raise ContractViolation(f"plan must have {T_PRED} points, got {plan_points.shape}")
    length, width = footprint
    pairs = []
    for tid, means in target_means:
        means = np.asarray(means, dtype=float)
        if means.shape != (T_PRED, 2):
            raise ContractViolation(f"target {tid} means must be ({T_PRED}, 2)")
        gap = np.abs(means - plan_points)
        hit = (gap[:, 0] < length) & (gap[:, 1] < width)
        idx = np.nonzero(hit)[0]
        if len(idx):
            k = int(idx[0])
            point = tuple(((means[k] + plan_points[k]) / 2.0).round(6))
            pairs.append((tid, k + 1, point))     # frames are 1-based
    return CollisionReport(pairs=pairs, clear=not pairs)


# --- JSON exchange format ----------------------------------------------------

def plan_to_dict(plan: CandidatePlan) -> dict:
    return {
        "behavior": {"lateral": plan.lateral, "longitudinal": plan.longitudinal},
        "aggressiveness_s": plan.aggressiveness,
        "knots": np.round(plan.knots, 6).tolist(),
        "points": np.round(plan.trajectory.points, 6).tolist(),
        "units": {"length": "m", "time": "s"},
    }


def plan_from_dict(d: dict) -> CandidatePlan:
    """Rebuild a plan from the exchange format; sampled points are authoritative."""
    knots = np.asarray(d["knots"], dtype=float)
    spline = fit_quintic(knots)
    points = np.asarray(d["points"], dtype=float)
    if points.shape != (T_PRED, 2):
        raise ContractViolation(f"plan points must be ({T_PRED}, 2), got {points.shape}")
    return CandidatePlan(
        lateral=d["behavior"]["lateral"], longitudinal=d["behavior"]["longitudinal"],
        aggressiveness=float(d["aggressiveness_s"]), spline=spline,
        trajectory=TrajectorySegment(0, points, t0_frame=1), knots=knots)

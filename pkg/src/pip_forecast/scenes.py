"""Scene sample construction from 5 Hz track tables.

A sample is one (ego vehicle, frame) pair: 3 s of history (16 points
including the current frame), the ego's 5 s future as its plan, every
fully-covered vehicle inside the ego-centric interaction area as a
prediction target, and for each target the vehicles inside the
target-centric area as its neighbors.  Targets carry a 6-class maneuver
label derived from lane ids and speeds; the labeling rule is a pragmatic
house rule, not something the datasets define.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ContractViolation, LabelingError
from .grid import GridSpec, cell_index
from .tracks import TrackTable

T_OBS = 16          # history points, current frame included
T_PRED = 25         # future points
FRAME_DT = 0.2      # canonical frame period [s]
MAX_STEP_M = 12.0   # per-frame displacement sanity bound (< 60 m/s)

LATERAL_CLASSES = ("keep", "left", "right")
LONGITUDINAL_CLASSES = ("normal", "brake")

# Lateral speed below which a historical lane change counts as settled.
ONGOING_LATERAL_SPEED = 0.15  # m/s


@dataclass(frozen=True)
class ManeuverLabel:
    lateral: str
    longitudinal: str

    def __post_init__(self):
        if self.lateral not in LATERAL_CLASSES:
            raise ValueError(f"bad lateral class {self.lateral!r}")
        if self.longitudinal not in LONGITUDINAL_CLASSES:
            raise ValueError(f"bad longitudinal class {self.longitudinal!r}")

    @property
    def lateral_index(self) -> int:
        return LATERAL_CLASSES.index(self.lateral)

    @property
    def longitudinal_index(self) -> int:
        return LONGITUDINAL_CLASSES.index(self.longitudinal)

    @property
    def index(self) -> int:
        """1-based class index in {1..6}: 2*lateral + (longitudinal+1)."""
        return 2 * self.lateral_index + self.longitudinal_index + 1

    @property
    def position(self) -> int:
        """0-based slot used for arrays of the six classes."""
        return self.index - 1

    @classmethod
    def from_position(cls, position: int) -> "ManeuverLabel":
        if not 0 <= position < 6:
            raise ValueError(f"maneuver position {position} outside 0..5")
        return cls(LATERAL_CLASSES[position // 2], LONGITUDINAL_CLASSES[position % 2])


@dataclass
class TrajectorySegment:
    vehicle_id: int
    points: np.ndarray   # (T, 2) meters at fixed 0.2 s spacing
    t0_frame: int        # absolute frame of the first point

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ContractViolation(f"segment points must be (T, 2), got {self.points.shape}")

    def validate(self, kind: str | None = None):
        if not np.isfinite(self.points).all():
            raise ContractViolation(f"non-finite points for vehicle {self.vehicle_id}")
        if kind == "history" and len(self.points) != T_OBS:
            raise ContractViolation(f"history must have {T_OBS} points, got {len(self.points)}")
        if kind == "future" and len(self.points) != T_PRED:
            raise ContractViolation(f"future must have {T_PRED} points, got {len(self.points)}")
        if len(self.points) > 1:
            step = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
            if step.max() >= MAX_STEP_M:
                raise ContractViolation(
                    f"vehicle {self.vehicle_id} moves {step.max():.1f} m in one frame")


def to_relative_frame(segment: TrajectorySegment, reference_pose) -> TrajectorySegment:
    """Translate a segment so reference_pose becomes the origin."""
    ref = np.asarray(reference_pose, dtype=float)
    return replace(segment, points=segment.points - ref)


@dataclass
class NeighborEntry:
    vehicle_id: int
    history: TrajectorySegment
    cell: tuple[int, int]    # cell in the owning target's neighbor grid


@dataclass
class TargetEntry:
    vehicle_id: int
    history: TrajectorySegment
    future: TrajectorySegment
    label: ManeuverLabel
    cell: tuple[int, int]    # cell in the ego-centric target grid
    neighbors: list[NeighborEntry] = field(default_factory=list)


@dataclass
class SceneSample:
    recording_id: str
    frame: int
    ego_id: int
    ego_history: TrajectorySegment
    ego_plan: TrajectorySegment          # ego's true future at build time
    targets: list[TargetEntry]
    reference_pose: np.ndarray           # ego position at the current frame
    lane_ids: dict[int, int] = field(default_factory=dict)  # vehicle -> lane at frame

    @property
    def scene_id(self) -> str:
        return f"{self.recording_id}:{self.ego_id}:{self.frame}"

    def validate(self, grid: GridSpec = GridSpec()):
        self.ego_history.validate("history")
        self.ego_plan.validate("future")
        seen_cells = set()
        for tgt in self.targets:
            if tgt.vehicle_id == self.ego_id:
                raise ContractViolation("ego listed as its own prediction target")
            tgt.history.validate("history")
            tgt.future.validate("future")
            pos = tgt.history.points[-1]
            cell = cell_index(pos - self.reference_pose, grid)
            if cell != tgt.cell:
                raise ContractViolation(
                    f"target {tgt.vehicle_id} cell {tgt.cell} inconsistent with position {cell}")
            if tgt.cell in seen_cells:
                raise ContractViolation(f"two targets share cell {tgt.cell}")
            seen_cells.add(tgt.cell)
            for nbr in tgt.neighbors:
                if nbr.vehicle_id == tgt.vehicle_id:
                    raise ContractViolation("target listed as its own neighbor")
                nbr.history.validate("history")


class _VehicleTrack:
    """Per-vehicle array view with O(1) frame lookup."""

    def __init__(self, frames: np.ndarray, x: np.ndarray, y: np.ndarray, lanes: np.ndarray):
        self.frames = frames
        self.xy = np.stack([x, y], axis=1)
        self.lanes = lanes
        self._idx = {int(f): i for i, f in enumerate(frames)}

    def index_of(self, frame: int) -> int | None:
        return self._idx.get(int(frame))

    def window(self, frame: int, before: int, after: int) -> int | None:
        """Index of `frame` if frames [frame-before, frame+after] are all present."""
        i = self.index_of(frame)
        if i is None or i - before < 0 or i + after >= len(self.frames):
            return None
        if self.frames[i + after] - self.frames[i - before] != before + after:
            return None   # gap inside the window
        return i


def _split_tracks(table: TrackTable) -> dict[int, _VehicleTrack]:
    out = {}
    for vid, grp in table.frames.groupby("vehicle_id", sort=True):
        out[int(vid)] = _VehicleTrack(
            grp["frame"].to_numpy(),
            grp["x"].to_numpy(float),
            grp["y"].to_numpy(float),
            grp["lane_id"].to_numpy(),
        )
    return out


def _label_from_track(trk: _VehicleTrack, i: int, left_decreasing: bool) -> ManeuverLabel:
    """Label the maneuver of the window centered at array index i (frame t)."""
    lanes = trk.lanes[i - T_OBS + 1: i + T_PRED + 1]
    xy = trk.xy[i - T_OBS + 1: i + T_PRED + 1]
    cur = T_OBS - 1                     # position of frame t inside the window
    lane_t = lanes[cur]

    def direction(delta: int) -> str:
        if (delta < 0) == left_decreasing:
            return "left"
        return "right"

    lateral = "keep"
    future_changes = np.nonzero(lanes[cur + 1:] != lane_t)[0]
    if len(future_changes):
        j = cur + 1 + future_changes[0]
        lateral = direction(int(lanes[j]) - int(lane_t))
    else:
        hist_changes = np.nonzero(lanes[:cur] != lane_t)[0]
        if len(hist_changes):
            s = hist_changes[-1]        # last frame still in the old lane
            vy = (xy[cur, 1] - xy[cur - 1, 1]) / FRAME_DT
            moved = xy[cur, 1] - xy[s, 1]
            # Still drifting in the direction of the recent change: ongoing.
            if abs(vy) > ONGOING_LATERAL_SPEED and vy * moved > 0:
                lateral = direction(int(lane_t) - int(lanes[s]))

    speeds = np.linalg.norm(np.diff(xy, axis=0), axis=1) / FRAME_DT
    hist_speed = speeds[:cur].mean()
    fut_speed = speeds[cur:].mean()
    longitudinal = "brake" if fut_speed < 0.8 * hist_speed else "normal"
    return ManeuverLabel(lateral, longitudinal)


def label_maneuver(table: TrackTable, vehicle_id: int, frame: int,
                   left_decreasing: bool = True) -> ManeuverLabel:
    """Classify the 6-class maneuver of a vehicle at a frame.

    Requires full [t-3s, t+5s] coverage at 5 Hz; incomplete windows raise
    LabelingError so callers skip the sample instead of mislabeling it.
    """
    if table.rate_hz != 5:
        raise ContractViolation(f"labeling expects a 5 Hz table, got {table.rate_hz} Hz")
    trks = _split_tracks(table)
    if vehicle_id not in trks:
        raise LabelingError(f"vehicle {vehicle_id} not in table")
    i = trks[vehicle_id].window(frame, T_OBS - 1, T_PRED)
    if i is None:
        raise LabelingError(f"vehicle {vehicle_id} lacks full coverage around frame {frame}")
    return _label_from_track(trks[vehicle_id], i, left_decreasing)


def _cell_center_offset(cell: tuple[int, int], grid: GridSpec) -> np.ndarray:
    r, c = cell
    return np.array([
        -grid.length / 2.0 + (r + 0.5) * grid.cell_length,
        -grid.width / 2.0 + (c + 0.5) * grid.cell_width,
    ])


def _resolve_cell_ties(candidates: list[tuple[tuple[int, int], int, np.ndarray]],
                       grid: GridSpec) -> tuple[dict[tuple[int, int], int], int]:
    """Keep one vehicle per cell: nearest to the cell center, ties by id."""
    best: dict[tuple[int, int], tuple[float, int]] = {}
    for cell, vid, offset in candidates:
        dist = float(np.linalg.norm(offset - _cell_center_offset(cell, grid)))
        key = (dist, vid)
        if cell not in best or key < best[cell]:
            best[cell] = key
    dropped = len(candidates) - len(best)
    return {cell: vid for cell, (_, vid) in best.items()}, dropped


def build_samples(table: TrackTable, grid: GridSpec = GridSpec(),
                  stride_frames: int = 1, ego_ids: list[int] | None = None,
                  left_decreasing: bool = True) -> tuple[list[SceneSample], dict]:
    """Cut one SceneSample per (ego, frame) with full 16/25 coverage.

    Targets are the other fully-covered vehicles inside the ego-centric
    area; each target's neighbors are the vehicles (ego included, target
    excluded) inside the target-centric area with full history.  Vehicles
    lacking coverage are skipped silently and tallied in the skip report.
    """
    if table.rate_hz != 5:
        raise ContractViolation(f"build_samples expects a 5 Hz table, got {table.rate_hz} Hz")
    if stride_frames < 1:
        raise ContractViolation("stride_frames must be >= 1")

    trks = _split_tracks(table)
    frame_groups: dict[int, list[int]] = {}
    for vid, trk in trks.items():
        for f in trk.frames:
            frame_groups.setdefault(int(f), []).append(vid)

    report = {"samples": 0, "ego_frames_skipped": 0, "targets_skipped_no_coverage": 0,
              "targets_dropped_cell_tie": 0, "neighbors_dropped_cell_tie": 0}
    samples: list[SceneSample] = []
    ego_pool = sorted(trks) if ego_ids is None else [v for v in sorted(trks) if v in set(ego_ids)]

    for ego in ego_pool:
        etrk = trks[ego]
        for k in range(0, len(etrk.frames), stride_frames):
            t = int(etrk.frames[k])
            ei = etrk.window(t, T_OBS - 1, T_PRED)
            if ei is None:
                report["ego_frames_skipped"] += 1
                continue
            ego_pos = etrk.xy[ei]

            tgt_candidates = []
            for vid in frame_groups.get(t, []):
                if vid == ego:
                    continue
                vi = trks[vid].window(t, T_OBS - 1, T_PRED)
                if vi is None:
                    if trks[vid].index_of(t) is not None and \
                            cell_index(trks[vid].xy[trks[vid].index_of(t)] - ego_pos, grid):
                        report["targets_skipped_no_coverage"] += 1
                    continue
                offset = trks[vid].xy[vi] - ego_pos
                cell = cell_index(offset, grid)
                if cell is not None:
                    tgt_candidates.append((cell, vid, offset))
            kept, dropped = _resolve_cell_ties(tgt_candidates, grid)
            report["targets_dropped_cell_tie"] += dropped

            targets = []
            for cell, vid in sorted(kept.items()):
                vtrk = trks[vid]
                vi = vtrk.index_of(t)
                tgt_pos = vtrk.xy[vi]

                nbr_candidates = []
                for nid in frame_groups.get(t, []):
                    if nid == vid:
                        continue
                    ntrk = trks[nid]
                    ni = ntrk.window(t, T_OBS - 1, 0)
                    if ni is None:
                        continue
                    offset = ntrk.xy[ni] - tgt_pos
                    ncell = cell_index(offset, grid)
                    if ncell is not None:
                        nbr_candidates.append((ncell, nid, offset))
                nbr_kept, nbr_dropped = _resolve_cell_ties(nbr_candidates, grid)
                report["neighbors_dropped_cell_tie"] += nbr_dropped

                neighbors = []
                for ncell, nid in sorted(nbr_kept.items()):
                    ni = trks[nid].index_of(t)
                    neighbors.append(NeighborEntry(
                        vehicle_id=nid,
                        history=TrajectorySegment(nid, trks[nid].xy[ni - T_OBS + 1: ni + 1],
                                                  t0_frame=t - T_OBS + 1),
                        cell=ncell))

                targets.append(TargetEntry(
                    vehicle_id=vid,
                    history=TrajectorySegment(vid, vtrk.xy[vi - T_OBS + 1: vi + 1],
                                              t0_frame=t - T_OBS + 1),
                    future=TrajectorySegment(vid, vtrk.xy[vi + 1: vi + T_PRED + 1],
                                             t0_frame=t + 1),
                    label=_label_from_track(vtrk, vi, left_decreasing),
                    cell=cell,
                    neighbors=neighbors))

            lane_ids = {vid: int(trks[vid].lanes[trks[vid].index_of(t)])
                        for vid in frame_groups.get(t, [])}
            samples.append(SceneSample(
                recording_id=table.recording_id,
                frame=t,
                ego_id=ego,
                ego_history=TrajectorySegment(ego, etrk.xy[ei - T_OBS + 1: ei + 1],
                                              t0_frame=t - T_OBS + 1),
                ego_plan=TrajectorySegment(ego, etrk.xy[ei + 1: ei + T_PRED + 1], t0_frame=t + 1),
                targets=targets,
                reference_pose=ego_pos.copy(),
                lane_ids=lane_ids))
            report["samples"] += 1

    return samples, report


# --- splits and persistence -------------------------------------------------

def split_of(recording_id: str, vehicle_id: int, seed: int = 0) -> str:
    """Stable 70/20/10 train/test/eval split keyed by trajectory id."""
    digest = hashlib.md5(f"{seed}:{recording_id}:{vehicle_id}".encode()).hexdigest()
    u = int(digest[:12], 16) / 16 ** 12
    if u < 0.7:
        return "train"
    if u < 0.9:
        return "test"
    return "eval"


def write_manifest(samples: list[SceneSample], path: str | Path):
    """Persist the (recording, ego, frame) index as diffable JSON lines."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps({"recording_id": s.recording_id,
                                 "ego_id": s.ego_id, "frame": s.frame}) + "\n")


def read_manifest(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _segment_to_dict(seg: TrajectorySegment) -> dict:
    return {"vehicle_id": seg.vehicle_id, "t0_frame": seg.t0_frame,
            "points": np.round(seg.points, 6).tolist()}


def _segment_from_dict(d: dict) -> TrajectorySegment:
    return TrajectorySegment(d["vehicle_id"], np.asarray(d["points"], float), d["t0_frame"])


def sample_to_dict(sample: SceneSample) -> dict:
    return {
        "recording_id": sample.recording_id,
        "frame": sample.frame,
        "ego_id": sample.ego_id,
        "reference_pose": np.round(sample.reference_pose, 6).tolist(),
        "ego_history": _segment_to_dict(sample.ego_history),
        "ego_plan": _segment_to_dict(sample.ego_plan),
        "lane_ids": {str(k): v for k, v in sample.lane_ids.items()},
        "targets": [{
            "vehicle_id": t.vehicle_id,
            "history": _segment_to_dict(t.history),
            "future": _segment_to_dict(t.future),
            "label": {"lateral": t.label.lateral, "longitudinal": t.label.longitudinal},
            "cell": list(t.cell),
            "neighbors": [{
                "vehicle_id": n.vehicle_id,
                "history": _segment_to_dict(n.history),
                "cell": list(n.cell),
            } for n in t.neighbors],
        } for t in sample.targets],
    }


def sample_from_dict(d: dict) -> SceneSample:
    targets = [TargetEntry(
        vehicle_id=t["vehicle_id"],
        history=_segment_from_dict(t["history"]),
        future=_segment_from_dict(t["future"]),
        label=ManeuverLabel(**t["label"]),
        cell=tuple(t["cell"]),
        neighbors=[NeighborEntry(n["vehicle_id"], _segment_from_dict(n["history"]),
                                 tuple(n["cell"])) for n in t["neighbors"]],
    ) for t in d["targets"]]
    return SceneSample(
        recording_id=d["recording_id"], frame=d["frame"], ego_id=d["ego_id"],
        ego_history=_segment_from_dict(d["ego_history"]),
        ego_plan=_segment_from_dict(d["ego_plan"]),
        targets=targets,
        reference_pose=np.asarray(d["reference_pose"], float),
        lane_ids={int(k): v for k, v in d.get("lane_ids", {}).items()})


def write_scenes(samples: list[SceneSample], path: str | Path):
    """Full-sample JSON-lines snapshot (the scene store consumed by the service)."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_dict(s)) + "\n")


def read_scenes(path: str | Path) -> list[SceneSample]:
    with open(path) as fh:
        return [sample_from_dict(json.loads(line)) for line in fh if line.strip()]

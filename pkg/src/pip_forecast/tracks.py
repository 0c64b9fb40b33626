"""Raw highway track ingestion and rate normalization.

Two readers are provided:

- ``load_ngsim``: the camera-based US highway CSV export (feet, 10 Hz,
  one file per site).  Longitudinal position lives in ``Local_Y`` and
  lateral in ``Local_X``; both are converted to meters at load time so
  nothing downstream ever sees feet.
- ``load_highd``: the German drone recordings (meters, 25 Hz, one
  directory per recording with tracks + per-track meta + recording meta).
  Tracks on the opposing carriageway are mirrored so +x is always the
  travel direction within a table.

``resample`` decimates any supported rate down to the canonical 5 Hz
(0.2 s frame period) used by the rest of the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError, UnsupportedRateError

FEET_TO_METERS = 0.3048
SUPPORTED_RATES = (5, 10, 25)

# NGSIM trajectory export schema (subset we need).
NGSIM_COLUMNS = {
    "Vehicle_ID": "vehicle_id",
    "Frame_ID": "frame",
    "Local_X": "lateral_ft",
    "Local_Y": "longitudinal_ft",
    "Lane_ID": "lane_id",
}

# Site span sanity bound: no NGSIM segment is anywhere near 3 km long.
NGSIM_MAX_COORD_M = 3000.0


@dataclass
class TrackTable:
    """All observations of one recording in canonical units.

    ``frames`` columns: frame (int), vehicle_id (int), x (m, longitudinal,
    +x = travel direction), y (m, lateral), lane_id (int).  Rows sorted by
    (vehicle_id, frame).
    """

    recording_id: str
    frames: pd.DataFrame
    rate_hz: int
    direction: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        required = ["frame", "vehicle_id", "x", "y", "lane_id"]
        missing = [c for c in required if c not in self.frames.columns]
        if missing:
            raise SchemaError(f"track table missing columns {missing}")
        if self.rate_hz not in SUPPORTED_RATES:
            raise DataError(f"unsupported rate {self.rate_hz} Hz (expected one of {SUPPORTED_RATES})")
        if not np.isfinite(self.frames[["x", "y"]].to_numpy()).all():
            raise DataError("non-finite coordinates in track table")
        for vid, grp in self.frames.groupby("vehicle_id", sort=False):
            d = np.diff(grp["frame"].to_numpy())
            if len(d) and d.min() <= 0:
                raise DataError(f"non-monotonic or duplicate frames for vehicle_id {vid}")

    def vehicle_ids(self) -> np.ndarray:
        return self.frames["vehicle_id"].unique()


def _sorted_table(df: pd.DataFrame) -> pd.DataFrame:
    return df.sort_values(["vehicle_id", "frame"], kind="mergesort").reset_index(drop=True)


def load_ngsim(path: str | Path, recording_id: str | None = None) -> TrackTable:
    """Read one NGSIM trajectory CSV into a canonical TrackTable (meters, 10 Hz)."""
    path = Path(path)
    try:
        raw = pd.read_csv(path)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path} is empty") from exc
    missing = [c for c in NGSIM_COLUMNS if c not in raw.columns]
    if missing:
        raise SchemaError(f"{path} missing NGSIM columns {missing}")

    df = pd.DataFrame({
        "frame": raw["Frame_ID"].astype(int),
        "vehicle_id": raw["Vehicle_ID"].astype(int),
        # NGSIM: Local_Y runs along the roadway, Local_X across it.
        "x": raw["Local_Y"].astype(float) * FEET_TO_METERS,
        "y": raw["Local_X"].astype(float) * FEET_TO_METERS,
        "lane_id": raw["Lane_ID"].astype(int),
    })
    if len(df) and float(df[["x", "y"]].abs().to_numpy().max()) > NGSIM_MAX_COORD_M:
        raise DataError(
            f"{path}: coordinate exceeds {NGSIM_MAX_COORD_M} m after feet->meters conversion; "
            "input units are probably not feet")
    return TrackTable(recording_id=recording_id or path.stem,
                      frames=_sorted_table(df), rate_hz=10)


def _find_one(directory: Path, suffix: str) -> Path:
    hits = sorted(directory.glob(f"*{suffix}"))
    if not hits:
        raise SchemaError(f"{directory} has no *{suffix} file")
    return hits[0]


def load_highd(recording_dir: str | Path, recording_id: str | None = None) -> TrackTable:
    """Read one highD recording directory into a canonical TrackTable.

    Coordinates are already meters.  Vehicles on the carriageway driving
    toward -x (direction code 1) are mirrored in x and y so that +x is the
    travel direction for every row; lane ids are kept verbatim.
    """
    recording_dir = Path(recording_dir)
    tracks = pd.read_csv(_find_one(recording_dir, "_tracks.csv"))
    tracks_meta = pd.read_csv(_find_one(recording_dir, "_tracksMeta.csv"))
    rec_meta = pd.read_csv(_find_one(recording_dir, "_recordingMeta.csv"))

    for col in ("frame", "id", "x", "y", "laneId"):
        if col not in tracks.columns:
            raise SchemaError(f"highD tracks file missing column {col}")
    if "drivingDirection" not in tracks_meta.columns or "id" not in tracks_meta.columns:
        raise SchemaError("highD tracksMeta file missing id/drivingDirection")
    if "frameRate" not in rec_meta.columns:
        raise SchemaError("highD recordingMeta file missing frameRate")

    rate_hz = int(rec_meta["frameRate"].iloc[0])
    direction = dict(zip(tracks_meta["id"].astype(int), tracks_meta["drivingDirection"].astype(int)))
    unknown = sorted(set(direction.values()) - {1, 2})
    if unknown:
        raise DataError(f"unknown drivingDirection code(s) {unknown} (expected 1 or 2)")

    vid = tracks["id"].astype(int).to_numpy()
    sign = np.array([1.0 if direction.get(v, 2) == 2 else -1.0 for v in vid])
    df = pd.DataFrame({
        "frame": tracks["frame"].astype(int),
        "vehicle_id": vid,
        "x": tracks["x"].astype(float) * sign,
        "y": tracks["y"].astype(float) * sign,
        "lane_id": tracks["laneId"].astype(int),
    })
    return TrackTable(recording_id=recording_id or recording_dir.name,
                      frames=_sorted_table(df), rate_hz=rate_hz)


def resample(table: TrackTable, target_hz: int = 5) -> TrackTable:
    """Decimate a table to target_hz by keeping every (rate/target)-th frame.

    Decimation phase is anchored to the recording's first frame (not each
    vehicle's) so that vehicles still share frame indices afterwards;
    kept frames are renumbered to consecutive indices at the new rate.
    A table already at target_hz is returned unchanged.
    """
    if table.rate_hz % target_hz != 0:
        raise UnsupportedRateError(
            f"cannot resample {table.rate_hz} Hz to {target_hz} Hz (non-integer stride)")
    stride = table.rate_hz // target_hz
    if stride == 1:
        return table
    f0 = int(table.frames["frame"].min())
    keep = (table.frames["frame"] - f0) % stride == 0
    df = table.frames.loc[keep].copy()
    df["frame"] = (df["frame"] - f0) // stride
    return TrackTable(recording_id=table.recording_id, frames=df.reset_index(drop=True),
                      rate_hz=target_hz, direction=table.direction)

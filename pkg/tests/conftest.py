import numpy as np
import pandas as pd
import pytest

from pip_forecast.tracks import TrackTable


def make_table(vehicles: dict, rate_hz: int = 5, recording_id: str = "toy") -> TrackTable:
    """Build a TrackTable from {vehicle_id: (frames, x, y, lane_id)} arrays."""
    parts = []
    for vid, (frames, x, y, lane) in vehicles.items():
        frames = np.asarray(frames)
        parts.append(pd.DataFrame({
            "frame": frames.astype(int),
            "vehicle_id": np.full(len(frames), vid, dtype=int),
            "x": np.asarray(x, dtype=float),
            "y": np.asarray(y, dtype=float),
            "lane_id": np.broadcast_to(np.asarray(lane, dtype=int), (len(frames),)),
        }))
    df = pd.concat(parts).sort_values(["vehicle_id", "frame"]).reset_index(drop=True)
    return TrackTable(recording_id=recording_id, frames=df, rate_hz=rate_hz)


def straight_vehicle(n_frames: int, speed: float = 10.0, x0: float = 0.0,
                     y: float = 1.85, lane: int = 1, first_frame: int = 0):
    """Constant-speed straight-line track tuple for make_table."""
    frames = np.arange(first_frame, first_frame + n_frames)
    x = x0 + speed * 0.2 * np.arange(n_frames)
    return (frames, x, np.full(n_frames, y), lane)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

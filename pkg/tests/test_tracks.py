import numpy as np
import pandas as pd
import pytest

from conftest import make_table, straight_vehicle
from pip_forecast.errors import DataError, SchemaError, UnsupportedRateError
from pip_forecast.tracks import load_highd, load_ngsim, resample


def write_ngsim(path, rows):
    cols = ["Vehicle_ID", "Frame_ID", "Local_X", "Local_Y", "Lane_ID"]
    pd.DataFrame(rows, columns=cols).to_csv(path, index=False)


def test_ngsim_feet_to_meters(tmp_path):
    f = tmp_path / "ngsim.csv"
    write_ngsim(f, [[1, 10, 20.0, 200.0, 3]])
    table = load_ngsim(f)
    row = table.frames.iloc[0]
    assert row["x"] == pytest.approx(60.96)     # Local_Y 200 ft
    assert row["y"] == pytest.approx(6.096)
    assert table.rate_hz == 10


def test_ngsim_missing_column(tmp_path):
    f = tmp_path / "bad.csv"
    pd.DataFrame({"Vehicle_ID": [1], "Frame_ID": [1], "Local_X": [0.0]}).to_csv(f, index=False)
    with pytest.raises(SchemaError, match="Local_Y"):
        load_ngsim(f)


def test_ngsim_empty_file(tmp_path):
    f = tmp_path / "empty.csv"
    f.write_text("")
    with pytest.raises(SchemaError):
        load_ngsim(f)


def test_ngsim_toy_fixture_three_vehicles(tmp_path):
    f = tmp_path / "toy.csv"
    rows = []
    for vid in (1, 2, 3):
        for k in range(5):
            rows.append([vid, 100 + k, 10.0 * vid, 50.0 + 5 * k, vid])
    write_ngsim(f, rows)
    table = load_ngsim(f)
    assert sorted(table.vehicle_ids()) == [1, 2, 3]
    for _, grp in table.frames.groupby("vehicle_id"):
        assert (np.diff(grp["frame"]) > 0).all()


def test_ngsim_non_monotonic_frames(tmp_path):
    f = tmp_path / "dup.csv"
    write_ngsim(f, [[7, 10, 0.0, 0.0, 1], [7, 10, 0.0, 1.0, 1]])
    with pytest.raises(DataError, match="7"):
        load_ngsim(f)


def test_ngsim_unit_sanity(tmp_path):
    f = tmp_path / "meters_by_mistake.csv"
    write_ngsim(f, [[1, 1, 0.0, 99999.0, 1]])
    with pytest.raises(DataError, match="feet"):
        load_ngsim(f)


def write_highd(tmp_path, tracks_rows, directions, frame_rate=25):
    (tmp_path / "01_tracks.csv").write_text(
        "frame,id,x,y,laneId\n" +
        "\n".join(",".join(map(str, r)) for r in tracks_rows) + "\n")
    (tmp_path / "01_tracksMeta.csv").write_text(
        "id,drivingDirection\n" +
        "\n".join(f"{vid},{d}" for vid, d in directions.items()) + "\n")
    (tmp_path / "01_recordingMeta.csv").write_text(f"id,frameRate\n1,{frame_rate}\n")
    return tmp_path


def test_highd_direction_normalization(tmp_path):
    # vehicle 1 drives toward -x (direction 1), vehicle 2 toward +x
    rows = []
    for k in range(4):
        rows.append([k, 1, 400.0 - 2.0 * k, 10.0, 2])
        rows.append([k, 2, 100.0 + 2.0 * k, 20.0, 5])
    write_highd(tmp_path, rows, {1: 1, 2: 2})
    table = load_highd(tmp_path)
    assert table.rate_hz == 25
    for _vid, grp in table.frames.groupby("vehicle_id"):
        assert (np.diff(grp["x"]) > 0).all(), "both carriageways normalized to +x"


def test_highd_200_frames_rate(tmp_path):
    rows = [[k, 1, float(k), 5.0, 2] for k in range(200)]
    write_highd(tmp_path, rows, {1: 2})
    assert load_highd(tmp_path).rate_hz == 25


def test_highd_unknown_direction(tmp_path):
    rows = [[0, 1, 0.0, 0.0, 1]]
    write_highd(tmp_path, rows, {1: 3})
    with pytest.raises(DataError, match="3"):
        load_highd(tmp_path)


def test_highd_lane_width_audit(tmp_path):
    # three lanes ~3.7 m apart; median per-lane lateral gap must be plausible
    rows = []
    for k in range(10):
        for lane, y in ((2, 4.0), (3, 7.7), (4, 11.4)):
            rows.append([k, lane * 10, 100.0 + k, y, lane])
    write_highd(tmp_path, rows, {20: 2, 30: 2, 40: 2})
    table = load_highd(tmp_path)
    medians = table.frames.groupby("lane_id")["y"].median().sort_index()
    widths = np.diff(medians.to_numpy())
    assert ((np.abs(widths) >= 2.5) & (np.abs(widths) <= 5.0)).all()


def test_resample_10_to_5():
    table = make_table({1: straight_vehicle(81, speed=5.0)}, rate_hz=10)
    out = resample(table, 5)
    assert out.rate_hz == 5
    assert len(out.frames) == 41
    assert np.array_equal(out.frames["frame"].to_numpy(), np.arange(41))


def test_resample_25_to_5():
    table = make_table({1: straight_vehicle(100, speed=2.0)}, rate_hz=25)
    out = resample(table, 5)
    assert len(out.frames) == 20


def test_resample_identity_at_5hz():
    table = make_table({1: straight_vehicle(30)}, rate_hz=5)
    out = resample(table, 5)
    assert out is table


def test_resample_idempotent():
    table = make_table({1: straight_vehicle(81)}, rate_hz=10)
    once = resample(table, 5)
    twice = resample(once, 5)
    pd.testing.assert_frame_equal(once.frames, twice.frames)


def test_resample_non_divisible():
    table = make_table({1: straight_vehicle(50)}, rate_hz=25)
    with pytest.raises(UnsupportedRateError):
        resample(table, 10)

from __future__ import annotations

import datetime as dt
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridshare.errors import ValidationError
from gridshare.profiles import (
    INTERVAL_STARTS,
    HouseAssets,
    IntervalRecord,
    PeriodSpec,
    SynthParams,
    aggregate_daily,
    ingest_csv,
    synthesize_profiles,
    write_assets_csv,
    write_intervals_csv,
)

DAY = dt.date(2021, 3, 1)


def day_records(house, date, loads, solars):
    return [IntervalRecord(house, date, h, float(l), float(s)) for h, l, s in zip(INTERVAL_STARTS, loads, solars)]


def write_files(tmp_path, interval_lines, asset_lines):
    intervals = tmp_path / "intervals.csv"
    assets = tmp_path / "assets.csv"
    intervals.write_text("house_id,timestamp,load_kwh,solar_kwh\n" + "".join(l + "\n" for l in interval_lines))
    assets.write_text("house_id,storage_kwh,panel_area_m2\n" + "".join(l + "\n" for l in asset_lines))
    return intervals, assets


def test_ingest_two_houses_round_trip(tmp_path) -> None:
    lines = [f"{h},2021-03-01T{hr:02d}:00,1.5,0.25" for h in ("A", "B") for hr in INTERVAL_STARTS]
    intervals, assets = write_files(tmp_path, lines, ["A,5,20", "B,0,0"])
    records, houses = ingest_csv(intervals, assets)
    assert len(records) == 12
    assert [a.house_id for a in houses] == ["A", "B"]
    assert records[0] == IntervalRecord("A", DAY, 0, 1.5, 0.25)
    # and back out again
    out_i, out_a = tmp_path / "i2.csv", tmp_path / "a2.csv"
    write_intervals_csv(out_i, records)
    write_assets_csv(out_a, houses)
    assert ingest_csv(out_i, out_a) == (records, houses)


def test_ingest_negative_load_names_line(tmp_path) -> None:
    lines = ["A,2021-03-01T00:00,1.0,0", "A,2021-03-01T04:00,-1.0,0"]
    intervals, assets = write_files(tmp_path, lines, ["A,1,1"])
    with pytest.raises(ValidationError, match=r"intervals\.csv:3"):
        ingest_csv(intervals, assets)


def test_ingest_header_only_is_empty(tmp_path) -> None:
    intervals, assets = write_files(tmp_path, [], [])
    assert ingest_csv(intervals, assets) == ([], [])


@pytest.mark.parametrize(
    "line, message",
    [
        ("A,2021-03-01T05:00,1,0", "hour must be"),
        ("A,2021-03-01,1,0", "bad timestamp"),
        ("A,2021-03-01T00:00,nan,0", "not finite"),
        ("A,2021-03-01T00:00,1", "expected 4 fields"),
        ("Z,2021-03-01T00:00,1,0", "no row in"),
    ],
)
def test_ingest_rejects_bad_rows(tmp_path, line, message) -> None:
    intervals, assets = write_files(tmp_path, [line], ["A,1,1"])
    with pytest.raises(ValidationError, match=message):
        ingest_csv(intervals, assets)


def test_ingest_rejects_duplicates(tmp_path) -> None:
    row = "A,2021-03-01T00:00,1,0"
    intervals, assets = write_files(tmp_path, [row, row], ["A,1,1"])
    with pytest.raises(ValidationError, match="duplicate"):
        ingest_csv(intervals, assets)


def test_synthesize_cardinality_and_determinism() -> None:
    records, assets = synthesize_profiles(48, 365, seed=7)
    assert len(records) == 48 * 365 * 6
    assert len(assets) == 48
    again = synthesize_profiles(48, 365, seed=7)
    assert again == (records, assets)
    other, _ = synthesize_profiles(48, 365, seed=8)
    assert other != records


def test_synthesize_night_is_dark() -> None:
    records, _ = synthesize_profiles(1, 1, seed=1)
    night = [r.solar_energy for r in records if r.hour in (0, 20)]
    assert night == [0.0, 0.0]
    assert sum(r.solar_energy for r in records) > 0


def test_synthesize_mixes_surplus_and_deficit() -> None:
    records, assets = synthesize_profiles(48, 365, seed=7)
    days = aggregate_daily(records, assets)
    peak = [h.peak_deficit for h in days]
    assert min(peak) < 0 < max(peak)


def test_synth_params_validation() -> None:
    with pytest.raises(ValidationError):
        SynthParams(daylight=(2.0, 18.0))
    with pytest.raises(ValidationError):
        SynthParams.from_dict({"bogus": 1})
    assert SynthParams.from_dict({"storage_kwh": [1, 2]}).storage_kwh == (1, 2)


def test_aggregate_uniform_load_splits_evenly() -> None:
    recs = day_records("A", DAY, [1] * 6, [0] * 6)
    (h,) = aggregate_daily(recs, [HouseAssets("A", 0, 0)], PeriodSpec(8, 20))
    assert (h.load_peak, h.load_offpeak) == (3.0, 3.0)


def test_aggregate_solar_direct_summation() -> None:
    recs = day_records("A", DAY, [1] * 6, [0, 0, 2, 3, 1, 0])
    (h,) = aggregate_daily(recs, [HouseAssets("A", 2, 10)])
    assert (h.solar_peak, h.solar_offpeak) == (6.0, 0.0)
    assert (h.storage, h.panel_area) == (2, 10)


def test_aggregate_cardinality() -> None:
    recs = []
    for house in ("A", "B"):
        for date in (DAY, DAY + dt.timedelta(days=1)):
            recs += day_records(house, date, [1] * 6, [0] * 6)
    assets = [HouseAssets("A", 0, 0), HouseAssets("B", 0, 0)]
    assert len(aggregate_daily(recs, assets)) == 4


def test_aggregate_rejects_missing_interval() -> None:
    recs = day_records("A", DAY, [1] * 6, [0] * 6)[:-1]
    with pytest.raises(ValidationError, match="missing intervals"):
        aggregate_daily(recs, [HouseAssets("A", 0, 0)])


def test_period_spec_validation() -> None:
    with pytest.raises(ValidationError):
        PeriodSpec(9, 20)
    with pytest.raises(ValidationError):
        PeriodSpec(12, 12)
    assert PeriodSpec(8, 20).is_peak(16) and not PeriodSpec(8, 20).is_peak(20)


energy = st.floats(min_value=0, max_value=50, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(energy, min_size=6, max_size=6), st.lists(energy, min_size=6, max_size=6), st.integers(0, 10**6))
def test_aggregate_conserves_energy_and_ignores_order(loads, solars, shuffle_seed) -> None:
    recs = day_records("A", DAY, loads, solars)
    shuffled = list(recs)
    random.Random(shuffle_seed).shuffle(shuffled)
    assets = [HouseAssets("A", 1.0, 1.0)]
    (h,) = aggregate_daily(recs, assets)
    assert aggregate_daily(shuffled, assets) == [h]
    assert abs(h.load_peak + h.load_offpeak - math.fsum(loads)) <= 1e-9
    assert abs(h.solar_peak + h.solar_offpeak - math.fsum(solars)) <= 1e-9

"""Household energy time-series: data model, CSV ingestion, synthesis, daily aggregation.

All energies are kWh per 4-hour interval. A day has six intervals starting at
hours 0, 4, 8, 12, 16 and 20; an interval belongs to the peak period iff its
start hour lies inside the peak window.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

INTERVAL_HOURS = 4
INTERVAL_STARTS = (0, 4, 8, 12, 16, 20)
INTERVALS_PER_DAY = len(INTERVAL_STARTS)

INTERVAL_HEADER = ["house_id", "timestamp", "load_kwh", "solar_kwh"]
ASSETS_HEADER = ["house_id", "storage_kwh", "panel_area_m2"]
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"


@dataclass(frozen=True, slots=True)
class IntervalRecord:
    house_id: str
    date: dt.date
    hour: int
    load_energy: float
    solar_energy: float

    def __post_init__(self):
        if self.hour not in INTERVAL_STARTS:
            raise ValidationError(f"interval start hour must be one of {INTERVAL_STARTS}, got {self.hour}")
        for name in ("load_energy", "solar_energy"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value!r}")

    @property
    def timestamp(self) -> str:
        return f"{self.date.isoformat()}T{self.hour:02d}:00"


@dataclass(frozen=True, slots=True)
class HouseAssets:
    house_id: str
    storage_capacity: float
    panel_area: float

    def __post_init__(self):
        for name in ("storage_capacity", "panel_area"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} of house {self.house_id} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True, slots=True)
class HouseDay:
    """One household's daily aggregates split into peak and off-peak periods."""

    house_id: str
    date: dt.date
    load_peak: float
    load_offpeak: float
    solar_peak: float
    solar_offpeak: float
    storage: float = 0.0
    panel_area: float = 0.0

    def __post_init__(self):
        for name in ("load_peak", "load_offpeak", "solar_peak", "solar_offpeak", "storage", "panel_area"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value!r}")

    @property
    def peak_deficit(self) -> float:
        # storage fully discharged during peak
        return self.load_peak - self.storage - self.solar_peak

    @property
    def offpeak_deficit(self) -> float:
        # storage fully recharged during off-peak
        return self.load_offpeak + self.storage - self.solar_offpeak


@dataclass(frozen=True)
class PeriodSpec:
    peak_start_hour: int = 8
    peak_end_hour: int = 20

    def __post_init__(self):
        start, end = self.peak_start_hour, self.peak_end_hour
        if not (0 <= start < end <= 24):
            raise ValidationError(f"peak window [{start}, {end}) must be non-empty and inside [0, 24]")
        if start % INTERVAL_HOURS or end % INTERVAL_HOURS:
            raise ValidationError(f"peak window [{start}, {end}) must align to {INTERVAL_HOURS}-hour boundaries")

    def is_peak(self, hour: int) -> bool:
        return self.peak_start_hour <= hour < self.peak_end_hour


# -- CSV ingestion ---------------------------------------------------------------------

def parse_timestamp(text: str) -> tuple[dt.date, int]:
    try:
        stamp = dt.datetime.strptime(text, TIMESTAMP_FORMAT)
    except ValueError:
        raise ValidationError(f"bad timestamp {text!r}, expected YYYY-MM-DDTHH:00") from None
    if len(text) != 16 or stamp.minute != 0 or stamp.hour not in INTERVAL_STARTS:
        raise ValidationError(f"bad timestamp {text!r}, hour must be one of 00,04,08,12,16,20 and minutes 00")
    return stamp.date(), stamp.hour


def _read_rows(path: Path, header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            return
        if [c.strip() for c in first] != header:
            raise ValidationError(f"{path}:1: expected header {','.join(header)}, got {','.join(first)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield reader.line_num, row


def _float(text: str, what: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{what} is not finite")
    if value < 0:
        raise ValueError(f"negative {what} {text.strip()}")
    return value


def ingest_csv(path, assets_path) -> tuple[list[IntervalRecord], list[HouseAssets]]:
    """Read the interval and assets CSVs.

    Returns records sorted by (house_id, timestamp) and the asset rows sorted by
    house_id. Any malformed or invalid row raises :class:`ValidationError` naming
    the file and line.
    """
    path, assets_path = Path(path), Path(assets_path)

    assets: dict[str, HouseAssets] = {}
    for line, row in _read_rows(assets_path, ASSETS_HEADER):
        try:
            if len(row) != 3:
                raise ValueError(f"expected 3 fields, got {len(row)}")
            house = row[0].strip()
            if not house:
                raise ValueError("empty house_id")
            item = HouseAssets(house, _float(row[1], "storage_kwh"), _float(row[2], "panel_area_m2"))
        except (ValueError, ValidationError) as exc:
            raise ValidationError(f"{assets_path}:{line}: {exc}") from None
        if house in assets:
            raise ValidationError(f"{assets_path}:{line}: duplicate assets row for house {house}")
        assets[house] = item

    records: list[IntervalRecord] = []
    seen: set[tuple[str, dt.date, int]] = set()
    for line, row in _read_rows(path, INTERVAL_HEADER):
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            house = row[0].strip()
            if not house:
                raise ValueError("empty house_id")
            date, hour = parse_timestamp(row[1].strip())
            rec = IntervalRecord(house, date, hour, _float(row[2], "load_kwh"), _float(row[3], "solar_kwh"))
        except (ValueError, ValidationError) as exc:
            raise ValidationError(f"{path}:{line}: {exc}") from None
        key = (house, date, hour)
        if key in seen:
            raise ValidationError(f"{path}:{line}: duplicate row for house {house} at {rec.timestamp}")
        seen.add(key)
        if house not in assets:
            raise ValidationError(f"{path}:{line}: house {house} has no row in {assets_path}")
        records.append(rec)

    records.sort(key=lambda r: (r.house_id, r.date, r.hour))
    return records, [assets[h] for h in sorted(assets)]


def write_intervals_csv(path, records: Iterable[IntervalRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(INTERVAL_HEADER)
        for r in records:
            writer.writerow([r.house_id, r.timestamp, repr(r.load_energy), repr(r.solar_energy)])


def write_assets_csv(path, assets: Iterable[HouseAssets]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ASSETS_HEADER)
        for a in assets:
            writer.writerow([a.house_id, repr(a.storage_capacity), repr(a.panel_area)])


# -- synthetic generator ---------------------------------------------------------------

@dataclass(frozen=True)
class SynthParams:
    """Knobs of the synthetic household generator.

    Ranges are ``(low, high)`` pairs sampled uniformly per house. Loads scale
    with floor area relative to ``reference_floor_m2``.
    """

    start_date: str = "2021-01-01"
    floor_area_m2: tuple[float, float] = (90.0, 320.0)
    panel_fraction: float = 0.10
    storage_kwh: tuple[float, float] = (0.0, 10.0)
    base_load_kw: tuple[float, float] = (0.15, 0.55)
    evening_load_kw: tuple[float, float] = (0.4, 1.8)
    reference_floor_m2: float = 180.0
    seasonal_amplitude: float = 0.45
    load_noise: float = 0.16
    insolation_kwh_m2: tuple[float, float] = (2.5, 7.5)
    panel_efficiency: float = 0.18
    cloudiness: float = 0.35
    daylight: tuple[float, float] = (6.0, 18.0)
    diurnal_shape: tuple[float, ...] = field(default=(0.15, 0.35, 0.45, 0.55, 1.0, 0.85))

    def __post_init__(self):
        for name in ("floor_area_m2", "storage_kwh", "base_load_kw", "evening_load_kw", "insolation_kwh_m2"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or hi < lo:
                raise ValidationError(f"{name} must be a range 0 <= low <= high, got {(lo, hi)}")
        for name in ("panel_fraction", "reference_floor_m2", "seasonal_amplitude", "load_noise", "panel_efficiency"):
            if not math.isfinite(getattr(self, name)) or getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.reference_floor_m2 == 0:
            raise ValidationError("reference_floor_m2 must be positive")
        if not 0 <= self.cloudiness <= 1:
            raise ValidationError("cloudiness must lie in [0, 1]")
        sunrise, sunset = self.daylight
        if not (INTERVAL_STARTS[1] <= sunrise < sunset <= INTERVAL_STARTS[-1]):
            raise ValidationError("daylight window must lie inside [4, 20] so night intervals stay dark")
        if len(self.diurnal_shape) != INTERVALS_PER_DAY or min(self.diurnal_shape) < 0:
            raise ValidationError("diurnal_shape needs six non-negative weights")
        try:
            dt.date.fromisoformat(self.start_date)
        except ValueError:
            raise ValidationError(f"bad start_date {self.start_date!r}") from None

    @classmethod
    def from_dict(cls, data: dict) -> SynthParams:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown generator parameters: {sorted(unknown)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**kwargs)


def _solar_fractions(sunrise: float, sunset: float) -> np.ndarray:
    """Share of a sine-bell day of irradiance falling in each 4-hour interval."""
    starts = np.array(INTERVAL_STARTS, dtype=float)
    lo = np.clip(starts, sunrise, sunset)
    hi = np.clip(starts + INTERVAL_HOURS, sunrise, sunset)
    width = sunset - sunrise
    # integral of sin(pi (t - sunrise) / width)
    cdf = lambda t: (1 - np.cos(np.pi * (t - sunrise) / width)) / 2
    return cdf(hi) - cdf(lo)


def synthesize_profiles(
    n_houses: int, days: int, seed: int, params: SynthParams | None = None
) -> tuple[list[IntervalRecord], list[HouseAssets]]:
    """Generate seeded household load/solar series plus assets.

    Load is a floor-area-scaled base plus an evening-weighted diurnal bump with a
    seasonal factor and multiplicative noise. Solar is a sine bell over daylight
    scaled by panel area (``panel_fraction`` of floor area), with a day-level
    cloudiness factor shared by all houses.
    """
    if n_houses < 1 or days < 1:
        raise ValidationError("n_houses and days must both be >= 1")
    params = params or SynthParams()
    rng = np.random.default_rng(seed)
    start = dt.date.fromisoformat(params.start_date)
    dates = [start + dt.timedelta(days=d) for d in range(days)]
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)

    floor = rng.uniform(*params.floor_area_m2, size=n_houses)
    panel = params.panel_fraction * floor
    storage = rng.uniform(*params.storage_kwh, size=n_houses)
    size = floor / params.reference_floor_m2
    base_kw = rng.uniform(*params.base_load_kw, size=n_houses) * size
    bump_kw = rng.uniform(*params.evening_load_kw, size=n_houses) * size

    # cooling-dominated summer peak around day 200
    season = 1 + params.seasonal_amplitude * np.cos(2 * np.pi * (doy - 200) / 365.0)
    shape = np.asarray(params.diurnal_shape, dtype=float)
    noise = rng.lognormal(0.0, params.load_noise, size=(n_houses, days, INTERVALS_PER_DAY))
    load = INTERVAL_HOURS * (
        base_kw[:, None, None] + bump_kw[:, None, None] * season[None, :, None] * shape[None, None, :]
    ) * noise

    lo_ins, hi_ins = params.insolation_kwh_m2
    insolation = (lo_ins + hi_ins) / 2 + (hi_ins - lo_ins) / 2 * np.cos(2 * np.pi * (doy - 172) / 365.0)
    clear = 1 - params.cloudiness * rng.beta(0.6, 1.6, size=days)
    local = np.clip(rng.normal(1.0, 0.05, size=(n_houses, days)), 0.5, 1.5)
    fractions = _solar_fractions(*params.daylight)
    daily_yield = panel[:, None] * params.panel_efficiency * insolation[None, :] * clear[None, :] * local
    solar = daily_yield[:, :, None] * fractions[None, None, :]

    width = max(3, len(str(n_houses)))
    ids = [f"H{i + 1:0{width}d}" for i in range(n_houses)]
    assets = [HouseAssets(ids[i], float(storage[i]), float(panel[i])) for i in range(n_houses)]
    load_l = load.tolist()
    solar_l = solar.tolist()
    records = [
        IntervalRecord(ids[i], dates[d], INTERVAL_STARTS[k], load_l[i][d][k], solar_l[i][d][k])
        for i in range(n_houses)
        for d in range(days)
        for k in range(INTERVALS_PER_DAY)
    ]
    return records, assets


# -- aggregation -----------------------------------------------------------------------

def aggregate_daily(
    records: Iterable[IntervalRecord], assets: Sequence[HouseAssets], spec: PeriodSpec | None = None
) -> list[HouseDay]:
    """Split every complete house-day into peak/off-peak load and solar totals."""
    spec = spec or PeriodSpec()
    by_house = {a.house_id: a for a in assets}
    groups: dict[tuple[str, dt.date], list[IntervalRecord]] = defaultdict(list)
    for r in records:
        if r.house_id not in by_house:
            raise ValidationError(f"unknown house_id {r.house_id}: no assets row")
        groups[(r.house_id, r.date)].append(r)

    out = []
    for (house, date), day in sorted(groups.items()):
        hours = sorted(r.hour for r in day)
        if hours != list(INTERVAL_STARTS):
            missing = sorted(set(INTERVAL_STARTS) - set(hours))
            raise ValidationError(f"house {house} on {date}: missing intervals {missing}" if missing
                                  else f"house {house} on {date}: duplicate intervals")
        day.sort(key=lambda r: r.hour)
        peak = [r for r in day if spec.is_peak(r.hour)]
        off = [r for r in day if not spec.is_peak(r.hour)]
        a = by_house[house]
        out.append(HouseDay(
            house, date,
            load_peak=math.fsum(r.load_energy for r in peak),
            load_offpeak=math.fsum(r.load_energy for r in off),
            solar_peak=math.fsum(r.solar_energy for r in peak),
            solar_offpeak=math.fsum(r.solar_energy for r in off),
            storage=a.storage_capacity,
            panel_area=a.panel_area,
        ))
    return out


def interval_matrix(records: Sequence[IntervalRecord]):
    """Pivot records into aligned arrays.

    Returns ``(house_ids, timestamps, load, solar)`` with ``load[i, t]`` the load
    of ``house_ids[i]`` at ``timestamps[t]``. Every house must cover exactly the
    same timestamps.
    """
    by_house: dict[str, dict[tuple[dt.date, int], IntervalRecord]] = defaultdict(dict)
    for r in records:
        by_house[r.house_id][(r.date, r.hour)] = r
    house_ids = sorted(by_house)
    if not house_ids:
        return [], [], np.zeros((0, 0)), np.zeros((0, 0))
    stamps = sorted(by_house[house_ids[0]])
    for h in house_ids[1:]:
        if len(by_house[h]) != len(stamps) or sorted(by_house[h]) != stamps:
            raise ValidationError(f"house {h} does not cover the same intervals as {house_ids[0]}")
    load = np.array([[by_house[h][s].load_energy for s in stamps] for h in house_ids])
    solar = np.array([[by_house[h][s].solar_energy for s in stamps] for h in house_ids])
    return house_ids, stamps, load, solar

"""Net-metering time-of-use tariff and individual household daily bills.

Money is fixed point. Prices are integers in hundredths of a cent per kWh,
energies are quantized to hundredths of a kWh, so every product is an
integer number of 1e-4 cent units and sums are exact.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import math
from dataclasses import InitVar, dataclass, field
from decimal import Decimal
from typing import Iterable, Mapping

from .errors import ValidationError
from .profiles import HouseDay

PRICE_SCALE = 100        # price units per cent/kWh
ENERGY_SCALE = 100       # energy units per kWh (and per m2 of panel)
UNITS_PER_CENT = PRICE_SCALE * ENERGY_SCALE
UNITS_PER_DOLLAR = 100 * UNITS_PER_CENT

CASES = ("K", "L", "M", "N")
BILL_HEADER = ["house_id", "date", "cost_cents", "case"]


def energy_units(kwh: float) -> int:
    return int(round(kwh * ENERGY_SCALE))


def price_units(cents: float, name: str = "price") -> int:
    if not math.isfinite(cents) or cents < 0:
        raise ValidationError(f"{name} must be finite and >= 0, got {cents!r}")
    scaled = round(cents * PRICE_SCALE)
    if abs(scaled - cents * PRICE_SCALE) > 1e-6:
        raise ValidationError(f"{name}={cents} has more than two decimal places of a cent")
    return int(scaled)


def cents(units: int) -> float:
    return units / UNITS_PER_CENT


def format_cents(units: int) -> str:
    return str(Decimal(units).scaleb(-4).quantize(Decimal("0.0001")))


def format_dollars(units: int) -> str:
    # half-up (away from zero) to the cent, from exact units; no "-0.00"
    value = (Decimal(units) / UNITS_PER_DOLLAR).quantize(Decimal("0.01"), rounding="ROUND_HALF_UP")
    return str(value if value else abs(value))


def pos(x):
    return x if x > 0 else 0


@dataclass(frozen=True)
class Tariff:
    """Buy (``lambda_*``) and sell (``mu_*``) prices in cents/kWh per period.

    ``lambda_b`` (cents per kWh of storage per day) and ``lambda_a`` (cents per
    m2 of panel per day) amortize DER investments; ``overrides`` maps a house
    id to its own ``(lambda_b, lambda_a)``. Pass ``strict=False`` to skip the
    pricing conditions, e.g. to probe what breaks without them.
    """

    lambda_h: float
    lambda_l: float
    mu_h: float
    mu_l: float
    lambda_b: float = 0.0
    lambda_a: float = 0.0
    overrides: Mapping[str, tuple[float, float]] = field(default_factory=dict, compare=False)
    strict: InitVar[bool] = True

    def __post_init__(self, strict):
        for f in ("lambda_h", "lambda_l", "mu_h", "mu_l", "lambda_b", "lambda_a"):
            price_units(getattr(self, f), f)
        for house, (b, a) in self.overrides.items():
            price_units(b, f"lambda_b[{house}]")
            price_units(a, f"lambda_a[{house}]")
        object.__setattr__(self, "_units", tuple(price_units(getattr(self, f)) for f in
                                                 ("lambda_h", "lambda_l", "mu_h", "mu_l")))
        if strict:
            problems = self.violations()
            if problems:
                raise ValidationError("tariff violates pricing conditions: " + "; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if self.lambda_h < self.mu_h:
            out.append("lambda_h >= mu_h")
        if self.lambda_l < self.mu_l:
            out.append("lambda_l >= mu_l")
        if self.mu_h < self.lambda_l:
            out.append("mu_h >= lambda_l")
        return out

    def units(self) -> tuple[int, int, int, int]:
        """(lambda_h, lambda_l, mu_h, mu_l) in hundredths of a cent per kWh."""
        return self._units

    def amortization_prices(self, house_id: str) -> tuple[float, float]:
        return self.overrides.get(house_id, (self.lambda_b, self.lambda_a))

    def replace(self, **changes) -> Tariff:
        strict = changes.pop("strict", True)
        return Tariff(**{**{f.name: getattr(self, f.name) for f in dataclasses.fields(self)}, **changes},
                      strict=strict)

    @classmethod
    def from_dict(cls, data: Mapping) -> Tariff:
        data = dict(data)
        overrides = {h: tuple(v) for h, v in data.pop("overrides", {}).items()}
        try:
            return cls(**data, overrides=overrides)
        except TypeError as exc:
            raise ValidationError(f"bad tariff: {exc}") from None


DEFAULT_TARIFF = Tariff(54, 22, 30, 13)


@dataclass(frozen=True)
class HouseUnits:
    """A HouseDay quantized to fixed-point energy units."""

    house_id: str
    load_peak: int
    load_offpeak: int
    solar_peak: int
    solar_offpeak: int
    storage: int
    panel_area: int

    @classmethod
    def of(cls, h: HouseDay) -> HouseUnits:
        return cls(h.house_id, energy_units(h.load_peak), energy_units(h.load_offpeak),
                   energy_units(h.solar_peak), energy_units(h.solar_offpeak),
                   energy_units(h.storage), energy_units(h.panel_area))

    @property
    def peak_deficit(self) -> int:
        return self.load_peak - self.storage - self.solar_peak

    @property
    def offpeak_deficit(self) -> int:
        return self.load_offpeak + self.storage - self.solar_offpeak


def case_label(peak_deficit, offpeak_deficit) -> str:
    """K: deficit in both periods, L: peak surplus, M: off-peak surplus, N: surplus in both."""
    if peak_deficit >= 0:
        return "K" if offpeak_deficit >= 0 else "M"
    return "L" if offpeak_deficit >= 0 else "N"


def energy_cost(peak_deficit, offpeak_deficit, t: Tariff) -> float:
    """Net-metered energy cost in cents, float arithmetic."""
    return (t.lambda_h * pos(peak_deficit) - t.mu_h * pos(-peak_deficit)
            + t.lambda_l * pos(offpeak_deficit) - t.mu_l * pos(-offpeak_deficit))


def energy_cost_units(peak_deficit: int, offpeak_deficit: int, t: Tariff) -> int:
    lh, ll, mh, ml = t.units()
    return lh * pos(peak_deficit) - mh * pos(-peak_deficit) + ll * pos(offpeak_deficit) - ml * pos(-offpeak_deficit)


def amortization_units(u: HouseUnits, t: Tariff) -> int:
    b, a = t.amortization_prices(u.house_id)
    return price_units(b) * u.storage + price_units(a) * u.panel_area


@dataclass(frozen=True)
class DailyBill:
    house_id: str
    date: dt.date
    cost_units: int
    case: str = ""

    @property
    def cost(self) -> float:
        """Cost in cents; negative means a net credit."""
        return cents(self.cost_units)


def cost_without_der_units(h: HouseDay, t: Tariff) -> int:
    lh, ll, _, _ = t.units()
    return lh * energy_units(h.load_peak) + ll * energy_units(h.load_offpeak)


def cost_without_der(h: HouseDay, t: Tariff) -> float:
    """Daily cost in cents of buying all consumption from the grid."""
    return cents(cost_without_der_units(h, t))


def cost_with_der(h: HouseDay, t: Tariff, include_amortization: bool = False) -> DailyBill:
    """Daily net-metered bill with storage fully discharged on peak and recharged off-peak."""
    u = HouseUnits.of(h)
    dp, do = u.peak_deficit, u.offpeak_deficit
    total = energy_cost_units(dp, do, t)
    if include_amortization:
        total += amortization_units(u, t)
    return DailyBill(h.house_id, h.date, total, case_label(dp, do))


def write_bills_csv(path, bills: Iterable[DailyBill]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BILL_HEADER)
        for b in bills:
            writer.writerow([b.house_id, b.date.isoformat(), format_cents(b.cost_units), b.case])

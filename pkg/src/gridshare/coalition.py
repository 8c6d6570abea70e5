"""Cooperative P2P energy sharing: coalition cost, cost allocation, trades, game checks.

Houses in a coalition pool storage and solar. Per period the coalition settles
only its aggregate net position with the grid; internally every kWh moves at
the sharing price, which is the buy price when the coalition is short (or
exactly balanced) and the sell price when it is long. Each house's share is
its own net position valued at those prices, so shares add up exactly to the
coalition's bill.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .billing import (
    HouseUnits,
    Tariff,
    amortization_units,
    case_label,
    cents,
    energy_cost,
    energy_cost_units,
    format_cents,
    pos,
)
from .errors import ValidationError
from .profiles import HouseDay

MAX_CORE_HOUSES = 12
ALLOCATION_HEADER = ["date", "house_id", "xi_cents", "case", "pi_h", "pi_l"]
LEDGER_HEADER = ["date", "period", "seller", "buyer", "kwh", "price"]
PERIODS = ("peak", "off_peak")


@dataclass(frozen=True)
class CoalitionDay:
    members: tuple[str, ...]
    date: dt.date | None
    load_peak: float
    load_offpeak: float
    solar_peak: float
    solar_offpeak: float
    storage: float
    panel_area: float
    member_assets: tuple[tuple[str, float, float], ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.members:
            raise ValidationError("a coalition needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise ValidationError("coalition members must be distinct")

    @classmethod
    def from_houses(cls, houses: Sequence[HouseDay]) -> CoalitionDay:
        if not houses:
            raise ValidationError("a coalition needs at least one member")
        dates = {h.date for h in houses}
        if len(dates) > 1:
            raise ValidationError(f"houses span several dates: {sorted(dates)}")
        total = lambda name: math.fsum(getattr(h, name) for h in houses)
        return cls(
            tuple(h.house_id for h in houses), houses[0].date,
            total("load_peak"), total("load_offpeak"), total("solar_peak"), total("solar_offpeak"),
            total("storage"), total("panel_area"),
            tuple((h.house_id, h.storage, h.panel_area) for h in houses),
        )

    @property
    def peak_deficit(self) -> float:
        return self.load_peak - self.storage - self.solar_peak

    @property
    def offpeak_deficit(self) -> float:
        return self.load_offpeak + self.storage - self.solar_offpeak

    def scaled(self, alpha: float) -> CoalitionDay:
        """Every energy aggregate and the storage multiplied by ``alpha``."""
        return CoalitionDay(
            self.members, self.date, alpha * self.load_peak, alpha * self.load_offpeak,
            alpha * self.solar_peak, alpha * self.solar_offpeak, alpha * self.storage, self.panel_area,
            self.member_assets,
        )


def coalition_cost(c: CoalitionDay, t: Tariff, include_amortization: bool = False) -> float:
    """Daily cost in cents of a coalition settling its aggregate position with the grid."""
    total = energy_cost(c.peak_deficit, c.offpeak_deficit, t)
    if include_amortization:
        for house, storage, area in c.member_assets:
            b, a = t.amortization_prices(house)
            total += b * storage + a * area
    return total


def coalition_cost_units(houses: Iterable[HouseDay | HouseUnits], t: Tariff,
                         include_amortization: bool = False) -> int:
    """Exact fixed-point coalition cost from member-wise quantized energies."""
    units = [h if isinstance(h, HouseUnits) else HouseUnits.of(h) for h in houses]
    total = energy_cost_units(sum(u.peak_deficit for u in units), sum(u.offpeak_deficit for u in units), t)
    if include_amortization:
        total += sum(amortization_units(u, t) for u in units)
    return total


def sharing_prices(c: CoalitionDay, t: Tariff) -> tuple[float, float]:
    """Internal (peak, off-peak) trading prices in cents/kWh; balance counts as short."""
    pi_h = t.lambda_h if c.load_peak >= c.storage + c.solar_peak else t.mu_h
    pi_l = t.lambda_l if c.load_offpeak + c.storage >= c.solar_offpeak else t.mu_l
    return pi_h, pi_l


@dataclass(frozen=True)
class Allocation:
    date: dt.date | None
    shares: dict[str, int]          # fixed-point units (1e-4 cent)
    case: str
    cost_units: int                 # grand-coalition cost, same units
    pi_h: float
    pi_l: float

    @property
    def cost(self) -> float:
        return cents(self.cost_units)

    def share(self, house_id: str) -> float:
        """Cost share of one house in cents."""
        return cents(self.shares[house_id])


def _pi_units(t: Tariff, peak_deficit: int, offpeak_deficit: int) -> tuple[int, int]:
    lh, ll, mh, ml = t.units()
    return (lh if peak_deficit >= 0 else mh), (ll if offpeak_deficit >= 0 else ml)


def allocate(c: CoalitionDay, houses: Sequence[HouseDay], t: Tariff,
             include_amortization: bool = False) -> Allocation:
    """Split the grand-coalition bill among its members.

    Each share is the member's own peak and off-peak net position priced at
    the coalition's sharing prices (plus its amortization when requested).
    The coalition bill itself is computed independently from the aggregate
    position; the two agree exactly in fixed point.
    """
    ids = [h.house_id for h in houses]
    if sorted(ids) != sorted(c.members) or len(set(ids)) != len(ids):
        raise ValidationError("houses do not match the coalition members")
    if any(h.date != c.date for h in houses):
        raise ValidationError("houses and coalition refer to different dates")
    units = [HouseUnits.of(h) for h in houses]
    dp = sum(u.peak_deficit for u in units)
    do = sum(u.offpeak_deficit for u in units)
    pi_h, pi_l = _pi_units(t, dp, do)
    shares = {}
    for u in units:
        xi = pi_h * u.peak_deficit + pi_l * u.offpeak_deficit
        if include_amortization:
            xi += amortization_units(u, t)
        shares[u.house_id] = xi
    grand = coalition_cost_units(units, t, include_amortization)
    return Allocation(c.date, shares, case_label(dp, do), grand, pi_h / 100, pi_l / 100)


def allocate_day(houses: Sequence[HouseDay], t: Tariff, include_amortization: bool = False) -> Allocation:
    return allocate(CoalitionDay.from_houses(houses), houses, t, include_amortization)


# -- grid dependency -------------------------------------------------------------------

def grid_import(houses: Sequence[HouseDay], mode: str = "coalition") -> tuple[float, float]:
    """kWh bought from the grid in (peak, off-peak).

    ``individual``: every house settles alone, so surpluses cannot offset
    neighbours' deficits. ``coalition``: only the aggregate deficit is bought.
    """
    if not houses:
        raise ValidationError("grid_import needs at least one house")
    units = [HouseUnits.of(h) for h in houses]
    if mode == "individual":
        peak = sum(pos(u.peak_deficit) for u in units)
        off = sum(pos(u.offpeak_deficit) for u in units)
    elif mode == "coalition":
        peak = pos(sum(u.peak_deficit for u in units))
        off = pos(sum(u.offpeak_deficit for u in units))
    else:
        raise ValidationError(f"mode must be individual or coalition, got {mode!r}")
    return peak / 100, off / 100


# -- explicit trades -------------------------------------------------------------------

@dataclass(frozen=True)
class Trade:
    seller: str
    buyer: str
    kwh: float
    price: float


@dataclass(frozen=True)
class TradeLedger:
    date: dt.date | None
    period: str
    price: float
    trades: tuple[Trade, ...]
    grid_buy: dict[str, float]
    grid_sell: dict[str, float]


def _prorata(supply: Sequence[int], demand: Sequence[int]) -> dict[tuple[int, int], int]:
    """Integer flows with row sums == supply and column sums <= demand.

    Flow i->j is ``supply[i] * demand[j] / sum(demand)`` rounded by largest
    remainder, leftovers going to columns with spare capacity.
    """
    total = sum(demand)
    if sum(supply) > total:
        raise ValueError("supply exceeds demand")
    flows, rems = {}, []
    short = list(supply)
    spare = list(demand)
    for i, s in enumerate(supply):
        if s == 0:
            continue
        for j, d in enumerate(demand):
            if d == 0:
                continue
            q, r = divmod(s * d, total)
            if q:
                flows[(i, j)] = q
            short[i] -= q
            spare[j] -= q
            rems.append((-r, i, j))
    rems.sort()
    for _, i, j in rems:
        if short[i] > 0 and spare[j] > 0:
            flows[(i, j)] = flows.get((i, j), 0) + 1
            short[i] -= 1
            spare[j] -= 1
    for i in range(len(supply)):
        for j in range(len(demand)):
            if short[i] == 0:
                break
            take = min(short[i], spare[j])
            if take > 0:
                flows[(i, j)] = flows.get((i, j), 0) + take
                short[i] -= take
                spare[j] -= take
    return flows


def _wh_toward_zero(kwh: float) -> int:
    wh = math.floor(abs(kwh) * 1000)
    return wh if kwh >= 0 else -wh


def _period_ledger(date, period, ids, positions, price) -> TradeLedger:
    """Flows for one period; ``positions`` are net deficits in kWh, ``price`` in 1e-2 cent."""
    wh = [_wh_toward_zero(x) for x in positions]
    sellers = [i for i, x in enumerate(positions) if x < 0]
    buyers = [i for i, x in enumerate(positions) if x > 0]
    surplus = [-wh[i] for i in sellers]
    deficit = [wh[i] for i in buyers]
    # the smaller side is served in full, whichever way the price points
    if sum(deficit) >= sum(surplus):
        pairs = {(sellers[a], buyers[b]): q for (a, b), q in _prorata(surplus, deficit).items()}
    else:
        pairs = {(sellers[b], buyers[a]): q for (a, b), q in _prorata(deficit, surplus).items()}
    sold = [0] * len(ids)
    bought = [0] * len(ids)
    trades = []
    for (s, b), q in sorted(pairs.items()):
        sold[s] += q
        bought[b] += q
        trades.append(Trade(ids[s], ids[b], q / 1000, price / 100))
    grid_buy = {ids[i]: positions[i] - bought[i] / 1000 for i in buyers}
    grid_sell = {ids[i]: -positions[i] - sold[i] / 1000 for i in sellers}
    return TradeLedger(date, period, price / 100, tuple(trades), grid_buy, grid_sell)


def match_trades(houses: Sequence[HouseDay], t: Tariff) -> tuple[TradeLedger, TradeLedger]:
    """Explicit peer-to-peer flows realizing the sharing mechanism for one day.

    Surplus energy goes to deficit houses pro rata by deficit when the
    coalition is short; when it is long, deficits are served pro rata by
    surplus. Flows are whole Wh, never exceeding a house's own position, and
    residuals settle with the grid. The trade price is the sharing price used
    by :func:`allocate`.
    """
    if not houses:
        raise ValidationError("match_trades needs at least one house")
    units = [HouseUnits.of(h) for h in houses]
    pi_h, pi_l = _pi_units(t, sum(u.peak_deficit for u in units), sum(u.offpeak_deficit for u in units))
    ids = [h.house_id for h in houses]
    date = houses[0].date
    return (_period_ledger(date, "peak", ids, [h.peak_deficit for h in houses], pi_h),
            _period_ledger(date, "off_peak", ids, [h.offpeak_deficit for h in houses], pi_l))


def ledger_payments(ledgers: Iterable[TradeLedger], t: Tariff) -> dict[str, float]:
    """Net cents paid by each house: peer purchases minus peer sales plus grid settlement."""
    pay: dict[str, float] = {}
    for led in ledgers:
        buy, sell = (t.lambda_h, t.mu_h) if led.period == "peak" else (t.lambda_l, t.mu_l)
        for tr in led.trades:
            pay[tr.buyer] = pay.get(tr.buyer, 0.0) + tr.kwh * tr.price
            pay[tr.seller] = pay.get(tr.seller, 0.0) - tr.kwh * tr.price
        for h, kwh in led.grid_buy.items():
            pay[h] = pay.get(h, 0.0) + kwh * buy
        for h, kwh in led.grid_sell.items():
            pay[h] = pay.get(h, 0.0) - kwh * sell
    return pay


# -- game-property checks ------------------------------------------------------------

@dataclass
class PropertyReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps({"checked": self.checked, "violations": self.violations}, sort_keys=True)


def random_house_day(rng: np.random.Generator, house_id: str, date: dt.date | None = None) -> HouseDay:
    """Random house-day mixing surplus and deficit regimes in both periods."""
    return HouseDay(
        house_id, date,
        load_peak=float(rng.uniform(0, 20)), load_offpeak=float(rng.uniform(0, 15)),
        solar_peak=float(rng.uniform(0, 20)), solar_offpeak=float(rng.uniform(0, 6)),
        storage=float(rng.uniform(0, 10)), panel_area=float(rng.uniform(0, 30)),
    )


def random_disjoint_pair(rng: np.random.Generator, max_size: int = 6):
    """Sampler for :func:`check_subadditivity`: two disjoint random coalitions."""
    n_s, n_t = rng.integers(1, max_size + 1, size=2)
    houses = [random_house_day(rng, f"h{i}") for i in range(n_s + n_t)]
    return houses[:n_s], houses[n_s:]


def check_subadditivity(sampler: Callable[[np.random.Generator], tuple[Sequence[HouseDay], Sequence[HouseDay]]],
                        trials: int, t: Tariff, seed: int = 0, tol: float = 1e-6) -> PropertyReport:
    """C(S) + C(T) >= C(S u T) - tol over ``trials`` sampled disjoint pairs."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    report = PropertyReport("subadditivity")
    for k in range(trials):
        rng = np.random.default_rng([seed, k])
        s, u = sampler(rng)
        cs = coalition_cost(CoalitionDay.from_houses(s), t)
        cu = coalition_cost(CoalitionDay.from_houses(u), t)
        cj = coalition_cost(CoalitionDay.from_houses(list(s) + list(u)), t)
        report.checked += 1
        if cs + cu < cj - tol:
            report.violations.append({"trial": k, "c_s": cs, "c_t": cu, "c_union": cj})
    return report


def check_core(houses: Sequence[HouseDay], t: Tariff, include_amortization: bool = False) -> PropertyReport:
    """Exhaustively verify efficiency, individual rationality and every coalition constraint."""
    n = len(houses)
    if n > MAX_CORE_HOUSES:
        raise ValidationError(f"core check enumerates 2^N coalitions; N={n} exceeds {MAX_CORE_HOUSES}")
    if n == 0:
        raise ValidationError("core check needs at least one house")
    alloc = allocate_day(houses, t, include_amortization)
    units = [HouseUnits.of(h) for h in houses]
    xi = [alloc.shares[u.house_id] for u in units]
    report = PropertyReport("core")
    report.checked += 1
    if sum(xi) != alloc.cost_units:
        report.violations.append({"check": "efficiency", "sum_xi": cents(sum(xi)), "cost": alloc.cost})
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        cost = coalition_cost_units([units[i] for i in members], t, include_amortization)
        share = sum(xi[i] for i in members)
        report.checked += 1
        if share > cost:
            kind = "individual_rationality" if len(members) == 1 else "coalition"
            report.violations.append({"check": kind, "members": [units[i].house_id for i in members],
                                      "xi": cents(share), "cost": cents(cost)})
    return report


def check_homogeneity(c: CoalitionDay, t: Tariff, alpha: float, rel_tol: float = 1e-9) -> PropertyReport:
    """C(alpha * c) == alpha * C(c), amortization excluded."""
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    report = PropertyReport("homogeneity", checked=1)
    lhs = coalition_cost(c.scaled(alpha), t)
    rhs = alpha * coalition_cost(c, t)
    if not math.isclose(lhs, rhs, rel_tol=rel_tol, abs_tol=rel_tol):
        report.violations.append({"alpha": alpha, "scaled_cost": lhs, "alpha_times_cost": rhs})
    return report


# -- exports ---------------------------------------------------------------------------

def write_allocations_csv(path, allocations: Iterable[Allocation]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ALLOCATION_HEADER)
        for a in allocations:
            for house in sorted(a.shares):
                writer.writerow([a.date.isoformat() if a.date else "", house, format_cents(a.shares[house]),
                                 a.case, f"{a.pi_h:.2f}", f"{a.pi_l:.2f}"])


def write_ledger_csv(path, ledgers: Iterable[TradeLedger]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LEDGER_HEADER)
        for led in ledgers:
            for tr in led.trades:
                writer.writerow([led.date.isoformat() if led.date else "", led.period, tr.seller, tr.buyer,
                                 f"{tr.kwh:.3f}", f"{tr.price:.2f}"])

from __future__ import annotations

import datetime as dt
import itertools
import json

import numpy as np
import pytest

from gridshare.billing import DEFAULT_TARIFF, Tariff, cost_with_der, energy_cost
from gridshare.coalition import (
    CoalitionDay,
    allocate,
    allocate_day,
    check_core,
    check_homogeneity,
    check_subadditivity,
    coalition_cost,
    coalition_cost_units,
    grid_import,
    ledger_payments,
    match_trades,
    random_disjoint_pair,
    random_house_day,
    sharing_prices,
    write_allocations_csv,
    write_ledger_csv,
)
from gridshare.errors import ValidationError
from gridshare.profiles import HouseDay

T = DEFAULT_TARIFF
DAY = dt.date(2021, 6, 1)
A = HouseDay("A", DAY, load_peak=10, load_offpeak=5, solar_peak=3, solar_offpeak=1, storage=2)
B = HouseDay("B", DAY, load_peak=2, load_offpeak=1, solar_peak=3, solar_offpeak=1, storage=2)


def peak_only(hid: str, deficit: float) -> HouseDay:
    """A house whose peak net position is ``deficit`` and whose off-peak is balanced."""
    return HouseDay(hid, DAY, load_peak=max(deficit, 0), load_offpeak=0, solar_peak=max(-deficit, 0), solar_offpeak=0)


def cost_oracle(houses, t: Tariff) -> float:
    """Coalition cost summed straight from member quantities."""
    peak = sum(h.load_peak - h.storage - h.solar_peak for h in houses)
    off = sum(h.load_offpeak + h.storage - h.solar_offpeak for h in houses)
    return (t.lambda_h if peak > 0 else t.mu_h) * peak + (t.lambda_l if off > 0 else t.mu_l) * off


def test_two_house_coalition_cost() -> None:
    c = CoalitionDay.from_houses([A, B])
    assert (c.peak_deficit, c.offpeak_deficit) == (2, 8)
    assert coalition_cost(c, T) == 284 == cost_oracle([A, B], T)
    assert coalition_cost_units([A, B], T) == 284 * 10_000


def test_singleton_coalition_equals_individual_bill() -> None:
    for h in (A, B):
        assert coalition_cost(CoalitionDay.from_houses([h]), T) == cost_with_der(h, T).cost


def test_two_house_subadditivity_instance() -> None:
    separate = cost_with_der(A, T).cost + cost_with_der(B, T).cost
    assert separate == 356 >= coalition_cost(CoalitionDay.from_houses([A, B]), T)


def test_coalition_day_validation() -> None:
    with pytest.raises(ValidationError):
        CoalitionDay.from_houses([])
    with pytest.raises(ValidationError, match="distinct"):
        CoalitionDay.from_houses([A, A])
    with pytest.raises(ValidationError, match="dates"):
        CoalitionDay.from_houses([A, HouseDay("C", DAY + dt.timedelta(days=1), 1, 1, 0, 0)])


def test_sharing_prices() -> None:
    assert sharing_prices(CoalitionDay.from_houses([A, B]), T) == (54, 22)
    surplus = HouseDay("S", DAY, 1, 1, 5, 5, 1)
    assert sharing_prices(CoalitionDay.from_houses([surplus]), T) == (30, 13)
    balanced = HouseDay("E", DAY, 5, 1, 3, 1, 2)
    assert sharing_prices(CoalitionDay.from_houses([balanced]), T)[0] == 54


def test_two_house_allocation() -> None:
    alloc = allocate_day([A, B], T)
    assert alloc.case == "K"
    assert alloc.share("A") == 402 and alloc.share("B") == -118
    assert sum(alloc.shares.values()) == alloc.cost_units and alloc.cost == 284
    assert (alloc.pi_h, alloc.pi_l) == (54, 22)
    assert alloc.share("B") <= cost_with_der(B, T).cost


def test_identical_houses_share_equally() -> None:
    twins = [HouseDay(h, DAY, 4, 3, 6, 0.5, 1.5) for h in "XYZ"]
    alloc = allocate_day(twins, T)
    assert len(set(alloc.shares.values())) == 1
    assert check_core(twins, T).ok


def test_allocate_membership_checks() -> None:
    c = CoalitionDay.from_houses([A, B])
    with pytest.raises(ValidationError, match="members"):
        allocate(c, [A], T)


def test_allocation_with_amortization_balances() -> None:
    t = T.replace(lambda_b=1.25, lambda_a=0.5, overrides={"B": (2.0, 0.0)})
    houses = [HouseDay(h.house_id, DAY, h.load_peak, h.load_offpeak, h.solar_peak, h.solar_offpeak, h.storage, 12)
              for h in (A, B)]
    alloc = allocate_day(houses, t, include_amortization=True)
    assert sum(alloc.shares.values()) == alloc.cost_units
    assert alloc.cost == pytest.approx(284 + 1.25 * 2 + 0.5 * 12 + 2.0 * 2)
    assert check_core(houses, t, include_amortization=True).ok


def test_case_labels_match_aggregate_guards() -> None:
    rng = np.random.default_rng(4)
    for _ in range(500):
        houses = [random_house_day(rng, f"h{i}", DAY) for i in range(int(rng.integers(1, 6)))]
        alloc = allocate_day(houses, T)
        c = CoalitionDay.from_houses(houses)
        dp = round(sum(round(h.load_peak * 100) - round(h.storage * 100) - round(h.solar_peak * 100)
                       for h in houses))
        do = round(sum(round(h.load_offpeak * 100) + round(h.storage * 100) - round(h.solar_offpeak * 100)
                       for h in houses))
        assert (dp >= 0) == (alloc.case in "KM")
        assert (do >= 0) == (alloc.case in "KL")
        assert alloc.cost == pytest.approx(coalition_cost(c, T), abs=0.02 * 54 * len(houses))


def test_grid_import_examples() -> None:
    houses = [peak_only("P", 5), peak_only("Q", -3)]
    assert grid_import(houses, "individual") == (5, 0)
    assert grid_import(houses, "coalition") == (2, 0)
    short = [peak_only("P", 5), peak_only("Q", 3)]
    assert grid_import(short, "individual") == grid_import(short, "coalition") == (8, 0)
    with pytest.raises(ValidationError):
        grid_import(houses, "other")


def test_trades_split_pro_rata_by_deficit() -> None:
    houses = [peak_only("S", -3), peak_only("B1", 1), peak_only("B2", 2), peak_only("B3", 3)]
    peak, off = match_trades(houses, T)
    assert {t.buyer: t.kwh for t in peak.trades} == {"B1": 0.5, "B2": 1.0, "B3": 1.5}
    assert peak.grid_buy == {"B1": 0.5, "B2": 1.0, "B3": 1.5}
    assert peak.grid_sell == {"S": 0} and peak.price == 54
    assert off.trades == ()


def test_trades_long_coalition_serves_buyers_in_full() -> None:
    houses = [peak_only("S1", -3), peak_only("S2", -1), peak_only("B", 2)]
    peak, _ = match_trades(houses, T)
    assert {t.seller: t.kwh for t in peak.trades} == {"S1": 1.5, "S2": 0.5}
    assert peak.price == 30 and peak.grid_buy == {"B": 0}


def test_trades_exact_one_and_two() -> None:
    houses = [peak_only("S", -3), peak_only("B1", 1), peak_only("B2", 2)]
    peak, _ = match_trades(houses, T)
    assert [(t.seller, t.buyer, t.kwh, t.price) for t in peak.trades] == [("S", "B1", 1, 54), ("S", "B2", 2, 54)]
    assert peak.grid_sell == {"S": 0} and peak.grid_buy == {"B1": 0, "B2": 0}


def test_trades_without_counterparties() -> None:
    deficit = [peak_only("P", 2), peak_only("Q", 1)]
    peak, _ = match_trades(deficit, T)
    assert peak.trades == () and peak.grid_buy == {"P": 2, "Q": 1}
    surplus = [peak_only("P", -2), peak_only("Q", -1)]
    peak, _ = match_trades(surplus, T)
    assert peak.trades == () and peak.grid_sell == {"P": 2, "Q": 1} and peak.price == 30


def test_ledger_invariants_and_payment_consistency() -> None:
    rng = np.random.default_rng(12)
    for _ in range(500):
        houses = [random_house_day(rng, f"h{i}", DAY) for i in range(int(rng.integers(1, 9)))]
        ledgers = match_trades(houses, T)
        for led in ledgers:
            sold, bought = {}, {}
            for t in led.trades:
                assert t.kwh > 0
                sold[t.seller] = sold.get(t.seller, 0) + t.kwh
                bought[t.buyer] = bought.get(t.buyer, 0) + t.kwh
            for h in houses:
                pos = h.peak_deficit if led.period == "peak" else h.offpeak_deficit
                assert sold.get(h.house_id, 0) <= max(-pos, 0) + 1e-9
                assert bought.get(h.house_id, 0) <= max(pos, 0) + 1e-9
        pay = ledger_payments(ledgers, T)
        alloc = allocate_day(houses, T)
        for h in houses:
            assert abs(pay.get(h.house_id, 0.0) - alloc.share(h.house_id)) <= 1.0


def test_subadditivity_holds_under_valid_tariff() -> None:
    report = check_subadditivity(random_disjoint_pair, 2000, T, seed=1)
    assert report.checked == 2000 and report.ok


def test_subadditivity_breaks_when_buy_price_below_sell_price() -> None:
    t = Tariff(30, 22, 54, 13, strict=False)
    assert not check_subadditivity(random_disjoint_pair, 500, t, seed=1).ok


def test_subadditivity_oracle_two_houses() -> None:
    report = check_subadditivity(lambda rng: ([A], [B]), 1, T)
    assert report.ok


def test_core_two_house_example() -> None:
    report = check_core([A, B], T)
    assert report.ok and report.checked == 4
    assert json.loads(report.to_json()) == {"checked": 4, "violations": []}


def test_core_random_instances() -> None:
    rng = np.random.default_rng(6)
    for _ in range(50):
        houses = [random_house_day(rng, f"h{i}", DAY) for i in range(6)]
        assert check_core(houses, T).ok


def test_core_oracle_by_direct_enumeration() -> None:
    rng = np.random.default_rng(9)
    houses = [random_house_day(rng, f"h{i}", DAY) for i in range(5)]
    alloc = allocate_day(houses, T)
    for r in range(1, 6):
        for sub in itertools.combinations(houses, r):
            share = sum(alloc.share(h.house_id) for h in sub)
            assert share <= cost_oracle(sub, T) + 0.02 * 54 * len(sub)


def test_core_size_limit() -> None:
    rng = np.random.default_rng(0)
    with pytest.raises(ValidationError, match="exceeds"):
        check_core([random_house_day(rng, f"h{i}") for i in range(13)], T)


def test_homogeneity() -> None:
    c = CoalitionDay.from_houses([A, B])
    assert check_homogeneity(c, T, 1.0).ok
    assert coalition_cost(c.scaled(2), T) == 568
    rng = np.random.default_rng(2)
    for _ in range(200):
        houses = [random_house_day(rng, f"h{i}") for i in range(int(rng.integers(1, 6)))]
        assert check_homogeneity(CoalitionDay.from_houses(houses), T, 0.5).ok
    with pytest.raises(ValidationError):
        check_homogeneity(c, T, 0.0)


def test_float_cost_matches_energy_cost() -> None:
    c = CoalitionDay.from_houses([A, B])
    assert coalition_cost(c, T) == energy_cost(c.peak_deficit, c.offpeak_deficit, T)


def test_exports(tmp_path) -> None:
    write_allocations_csv(tmp_path / "a.csv", [allocate_day([A, B], T)])
    assert (tmp_path / "a.csv").read_text().splitlines() == [
        "date,house_id,xi_cents,case,pi_h,pi_l",
        "2021-06-01,A,402.0000,K,54.00,22.00",
        "2021-06-01,B,-118.0000,K,54.00,22.00",
    ]
    houses = [peak_only("S", -3), peak_only("B1", 1), peak_only("B2", 2)]
    write_ledger_csv(tmp_path / "l.csv", match_trades(houses, T))
    assert (tmp_path / "l.csv").read_text().splitlines() == [
        "date,period,seller,buyer,kwh,price",
        "2021-06-01,peak,S,B1,1.000,54.00",
        "2021-06-01,peak,S,B2,2.000,54.00",
    ]

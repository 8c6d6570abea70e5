"""Config-driven pipeline: partition, resilience ranking, P2P trading, comparison.

Each step writes its reports under the configured output directory. Files are
written to a temporary name and renamed into place, and their contents depend
only on the config and seed, so a rerun reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import os
import tempfile
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .billing import UNITS_PER_DOLLAR, cost_with_der, cost_without_der_units, format_dollars, write_bills_csv
from .coalition import (
    PropertyReport,
    allocate_day,
    grid_import,
    match_trades,
    write_allocations_csv,
    write_ledger_csv,
)
from .config import RunConfig
from .errors import DataError, GridshareError, ValidationError
from .feeder import (
    Partition,
    block_label,
    enumerate_partitions,
    filter_self_sufficient,
    load_house_nodes,
    load_switch_states,
    load_topology,
    partition,
    write_partition_csv,
)
from .graphs import Graph, correlation_network, visibility_graph, write_edge_list
from .percolation import percolation_curve, percolation_threshold, write_curve_csv, write_report_csv, ReportRow
from .profiles import INTERVAL_STARTS, aggregate_daily, ingest_csv, interval_matrix, synthesize_profiles

log = logging.getLogger(__name__)

VARIANTS = ("with_der", "without_der")
MODES = ("individual", "coalition")
SUMMARY_HEADER = ["label", "houses", "rho_c_with_der", "rho_c_without_der", "most_resilient", "status"]
GRID_HEADER = ["date", "period", "individual_kwh", "coalition_kwh"]
GRID_INTERVAL_HEADER = ["timestamp", "individual_kwh", "coalition_kwh"]
HOUSE_HEADER = ["house_id", "without_der_usd", "without_sharing_usd", "with_sharing_usd", "savings_usd",
                "savings_pct", "savings_pct_of_without_der"]
STATS_HEADER = ["statistic", "without_der_usd", "without_sharing_usd", "with_sharing_usd", "savings_usd",
                "savings_pct"]
MONTH_HEADER = ["month", "without_der_usd", "without_sharing_usd", "with_sharing_usd", "savings_usd", "savings_pct"]
COMPARE_HEADER = ["case", "energy_from_grid_kwh", "rho_c", "vertices", "edges", "status"]


# -- atomic output ---------------------------------------------------------------------

@contextmanager
def atomic_path(path):
    """Yield a temp path next to ``path``; rename it over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_atomic(path, writer, *args) -> Path:
    with atomic_path(path) as tmp:
        writer(tmp, *args)
    return Path(path)


def _write_rows(tmp, header, rows):
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_csv(path, header, rows) -> Path:
    return write_atomic(path, _write_rows, header, list(rows))


def _write_text(tmp, text):
    with open(tmp, "w") as fh:
        fh.write(text)


# -- savings report --------------------------------------------------------------------

def percent(numerator: int, denominator: int) -> Decimal | None:
    """numerator / |denominator| in percent, half-up to 2 decimals; None when undefined."""
    if denominator == 0:
        return None
    return (Decimal(100 * numerator) / abs(denominator)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def _pct_text(value: Decimal | None) -> str:
    return "" if value is None else str(value)


@dataclass(frozen=True)
class ScenarioTotals:
    """Costs of one house or one month in fixed-point units (1e-4 cent)."""

    key: str
    without_der: int
    without_sharing: int
    with_sharing: int

    @property
    def savings(self) -> int:
        return self.without_sharing - self.with_sharing

    def pct(self, denominator: str = "without_sharing") -> Decimal | None:
        return percent(self.savings, getattr(self, denominator))


@dataclass(frozen=True)
class SavingsReport:
    houses: tuple[ScenarioTotals, ...]
    months: tuple[ScenarioTotals, ...]
    denominator: str = "without_sharing"

    @property
    def total(self) -> ScenarioTotals:
        return ScenarioTotals(
            "Total",
            sum(h.without_der for h in self.houses),
            sum(h.without_sharing for h in self.houses),
            sum(h.with_sharing for h in self.houses),
        )

    def consistency_problems(self) -> list[str]:
        """Exact checks that the per-house, monthly and grand totals agree."""
        out = []
        total = self.total
        for field in ("without_der", "without_sharing", "with_sharing", "savings"):
            monthly = sum(getattr(m, field) for m in self.months)
            if monthly != getattr(total, field):
                out.append(f"monthly {field} sum {monthly} != yearly {getattr(total, field)}")
        if sum(h.savings for h in self.houses) != total.without_sharing - total.with_sharing:
            out.append("per-house savings do not sum to microgrid savings")
        return out

    def house_rows(self):
        for h in self.houses:
            yield [h.key, format_dollars(h.without_der), format_dollars(h.without_sharing),
                   format_dollars(h.with_sharing), format_dollars(h.savings),
                   _pct_text(h.pct("without_sharing")), _pct_text(h.pct("without_der"))]

    def month_rows(self):
        for m in (*self.months, self.total):
            yield [m.key, format_dollars(m.without_der), format_dollars(m.without_sharing),
                   format_dollars(m.with_sharing), format_dollars(m.savings), _pct_text(m.pct(self.denominator))]

    def stats_rows(self):
        cols = [np.array([getattr(h, f) for h in self.houses], dtype=float) / UNITS_PER_DOLLAR
                for f in ("without_der", "without_sharing", "with_sharing", "savings")]
        pcts = [h.pct(self.denominator) for h in self.houses]
        cols.append(np.array([float(p) for p in pcts if p is not None]))
        stats = (("mean", np.mean), ("min", np.min), ("q1", lambda a: np.percentile(a, 25)),
                 ("median", np.median), ("q3", lambda a: np.percentile(a, 75)), ("max", np.max))
        for name, fn in stats:
            yield [name] + [f"{fn(c):.2f}" if len(c) else "" for c in cols]


# -- the pipeline ----------------------------------------------------------------------

class Pipeline:
    """Lazily loads data and caches each step so ``all`` computes everything once."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self._data = None
        self._matrix = None
        self._partition = None
        self._blocks = None
        self._summary = None

    # inputs

    def data(self):
        if self._data is None:
            inp = self.cfg.input
            if inp.source == "csv":
                for p in (inp.intervals, inp.assets):
                    if not Path(p).is_file():
                        raise ValidationError(f"input file {p} does not exist")
                self._data = ingest_csv(inp.intervals, inp.assets)
            else:
                self._data = synthesize_profiles(inp.n_houses, inp.days, self.cfg.seed, inp.params)
            if not self._data[0]:
                raise DataError("no interval records in the input")
        return self._data

    def matrix(self):
        if self._matrix is None:
            self._matrix = interval_matrix(self.data()[0])
        return self._matrix

    def partition(self) -> Partition:
        if self._partition is None:
            fc = self.cfg.feeder
            topo = load_topology(fc.asset)
            self._partition = partition(topo, load_switch_states(fc.asset, fc.switch_config))
        return self._partition

    def block_houses(self) -> dict[str, list[str]]:
        """Block label -> sorted ids of houses present in the data and mapped to that block."""
        if self._blocks is None:
            part = self.partition()
            where = part.block_of()
            mapping = load_house_nodes(self.cfg.feeder.asset)
            present = set(self.matrix()[0])
            blocks = {label: [] for label in part.labels}
            unmapped = sorted(present - set(mapping))
            if unmapped:
                log.warning("%d houses have no feeder node and are ignored (first: %s)", len(unmapped), unmapped[0])
            for house in sorted(present & set(mapping)):
                node = mapping[house]
                if node not in where:
                    raise DataError(f"house {house} maps to unknown feeder node {node}")
                blocks[block_label(where[node])].append(house)
            self._blocks = blocks
        return self._blocks

    # steps

    def run_partition(self) -> Partition:
        fc = self.cfg.feeder
        part = self.partition()
        write_atomic(self.out / "partition.csv", write_partition_csv, part)
        mapping = load_house_nodes(fc.asset)
        counts = defaultdict(int)
        where = part.block_of()
        for node in mapping.values():
            if node in where:
                counts[where[node]] += 1
        write_csv(self.out / "partition_summary.csv", ["label", "nodes", "mapped_houses"],
                  [[label, len(block), counts[i]] for i, (label, block) in enumerate(zip(part.labels, part.blocks))])
        if fc.enumerate:
            found = enumerate_partitions(load_topology(fc.asset), fc.max_partitions)
            if fc.self_sufficiency_fraction is not None:
                found = filter_self_sufficient(found, mapping, self._house_totals(), fc.self_sufficiency_fraction)
            write_csv(self.out / "partitions_enumerated.csv", ["index", "blocks", "open_switches"],
                      [[i, len(p.blocks), " ".join(lab for lab, closed in p.states if not closed)]
                       for i, p in enumerate(found)])
        log.info("partition: %d blocks", len(part.blocks))
        return part

    def _house_totals(self) -> dict[str, tuple[float, float]]:
        ids, _, load, solar = self.matrix()
        return {h: (float(solar[i].sum()), float(load[i].sum())) for i, h in enumerate(ids)}

    def run_resilience(self) -> list[list]:
        if self._summary is not None:
            return self._summary
        cfg = self.cfg
        ids, _, load, solar = self.matrix()
        row_of = {h: i for i, h in enumerate(ids)}
        report, summary = [], []
        for label, houses in self.block_houses().items():
            if len(houses) < 2:
                log.warning("%s has %d houses; skipped", label, len(houses))
                summary.append([label, len(houses), None, None, 0, "skipped: fewer than 2 houses"])
                continue
            rows = [row_of[h] for h in houses]
            series = {"with_der": load[rows] - solar[rows], "without_der": load[rows]}
            rho, errors = {}, []
            for variant in VARIANTS:
                tag = f"{label}_{variant}"
                g = correlation_network(series[variant], cfg.correlation_threshold, cfg.abs_correlation)
                write_atomic(self.out / "graphs" / f"{tag}.csv", write_edge_list, g)
                rho[variant], err = self._threshold(g, self.out / "curves" / f"{tag}.csv")
                if err:
                    errors.append(f"{variant}: {err}")
                report.append(ReportRow(f"{label}/{variant}", rho[variant], g.vertex_count, g.edge_count,
                                        cfg.percolation.realizations, cfg.percolation.normalization,
                                        cfg.percolation.cluster_statistic, cfg.percolation.seed, err))
            summary.append([label, len(houses), rho["with_der"], rho["without_der"], 0,
                            "; ".join(errors) or "ok"])
        ranked = [r for r in summary if r[2] is not None]
        if ranked:
            best = max(ranked, key=lambda r: r[2])  # max keeps the first of equal values
            best[4] = 1
            log.info("most resilient block: %s (rho_c=%s)", best[0], best[2])
        write_atomic(self.out / "resilience_report.csv", write_report_csv, report)
        write_csv(self.out / "resilience_summary.csv", SUMMARY_HEADER,
                  [[r[0], r[1], "" if r[2] is None else repr(r[2]), "" if r[3] is None else repr(r[3]), r[4], r[5]]
                   for r in summary])
        self._summary = summary
        return summary

    def _threshold(self, g: Graph, curve_path: Path) -> tuple[float | None, str]:
        try:
            curve = percolation_curve(g, self.cfg.percolation)
            write_atomic(curve_path, write_curve_csv, curve)
            return percolation_threshold(curve), ""
        except GridshareError as exc:
            log.warning("%s: %s", curve_path.stem, exc)
            return None, str(exc)

    def selected_microgrid(self) -> str:
        blocks = self.block_houses()
        choice = self.cfg.microgrid
        if choice == "auto":
            flagged = [r[0] for r in self.run_resilience() if r[4]]
            if not flagged:
                raise DataError("no block has a percolation threshold; set microgrid explicitly")
            choice = flagged[0]
        if choice not in blocks:
            raise ValidationError(f"unknown microgrid {choice!r}; blocks are {sorted(blocks)}")
        return choice

    def run_trade(self) -> SavingsReport:
        cfg = self.cfg
        label = self.selected_microgrid()
        members = self.block_houses()[label]
        if not members:
            raise DataError(f"{label} has no houses")
        member_set = set(members)
        records, assets = self.data()
        days = aggregate_daily([r for r in records if r.house_id in member_set],
                               [a for a in assets if a.house_id in member_set], cfg.period)
        by_date = defaultdict(list)
        for h in days:
            by_date[h.date].append(h)
        if not by_date:
            raise DataError("span shorter than one day")
        incomplete = [d for d, hs in by_date.items() if len(hs) != len(members)]
        if incomplete:
            raise DataError(f"{len(incomplete)} days lack data for some houses (first {min(incomplete)})")
        t = cfg.tariff
        amort = cfg.include_amortization

        per_house = {h: [0, 0, 0] for h in members}
        per_month = defaultdict(lambda: [0, 0, 0])
        bills, allocations, ledgers, grid_rows = [], [], [], []
        checks = {name: PropertyReport(name) for name in
                  ("budget_balance", "individual_rationality", "grid_import_dominance")}
        imports = {}
        for date in sorted(by_date):
            hs = sorted(by_date[date], key=lambda h: h.house_id)
            alloc = allocate_day(hs, t, amort)
            allocations.append(alloc)
            month = per_month[date.strftime("%Y-%m")]
            checks["budget_balance"].checked += 1
            if sum(alloc.shares.values()) != alloc.cost_units:
                checks["budget_balance"].violations.append({"date": date.isoformat()})
            for h in hs:
                bill = cost_with_der(h, t, amort)
                bills.append(bill)
                costs = (cost_without_der_units(h, t), bill.cost_units, alloc.shares[h.house_id])
                for acc in (per_house[h.house_id], month):
                    for k in range(3):
                        acc[k] += costs[k]
                checks["individual_rationality"].checked += 1
                if costs[2] > costs[1]:
                    checks["individual_rationality"].violations.append(
                        {"date": date.isoformat(), "house": h.house_id})
            ledgers.extend(match_trades(hs, t))
            ind, coa = grid_import(hs, "individual"), grid_import(hs, "coalition")
            imports[date] = (ind, coa)
            for k, period in enumerate(("peak", "off_peak")):
                grid_rows.append([date.isoformat(), period, f"{ind[k]:.2f}", f"{coa[k]:.2f}"])
                checks["grid_import_dominance"].checked += 1
                if coa[k] > ind[k]:
                    checks["grid_import_dominance"].violations.append({"date": date.isoformat(), "period": period})

        report = SavingsReport(
            tuple(ScenarioTotals(h, *per_house[h]) for h in members),
            tuple(ScenarioTotals(m, *v) for m, v in sorted(per_month.items())),
            cfg.savings_denominator,
        )
        out = self.out
        write_atomic(out / "bills.csv", write_bills_csv, bills)
        write_atomic(out / "allocations.csv", write_allocations_csv, allocations)
        write_atomic(out / "ledger.csv", write_ledger_csv, ledgers)
        write_csv(out / "savings_houses.csv", HOUSE_HEADER, report.house_rows())
        write_csv(out / "savings_stats.csv", STATS_HEADER, report.stats_rows())
        write_csv(out / "savings_monthly.csv", MONTH_HEADER, report.month_rows())
        write_csv(out / "grid_import.csv", GRID_HEADER, grid_rows)
        write_csv(out / "grid_import_intervals.csv", GRID_INTERVAL_HEADER, self._interval_rows(members, imports))
        doc = {"microgrid": label, "houses": len(members), "days": len(by_date),
               "checks": {name: {"checked": r.checked, "violations": r.violations} for name, r in checks.items()}}
        write_atomic(out / "trade_summary.json", _write_text, json.dumps(doc, indent=2, sort_keys=True) + "\n")
        total = report.total
        log.info("trade: %s, %d houses, %d days, savings %s USD (%s%%)", label, len(members), len(by_date),
                 format_dollars(total.savings), _pct_text(total.pct(cfg.savings_denominator)))
        return report

    def _interval_imports(self, members: list[str], imports: dict):
        """Spread each period's import over its 4-hour intervals by the block's aggregate load share."""
        ids, stamps, load, _ = self.matrix()
        member_set = set(members)
        rows = [i for i, h in enumerate(ids) if h in member_set]
        agg = load[rows].sum(axis=0)
        by_stamp = dict(zip(stamps, agg.tolist()))
        spec = self.cfg.period
        for date in sorted(imports):
            ind, coa = imports[date]
            for k, peak in enumerate((True, False)):
                hours = [hr for hr in INTERVAL_STARTS if spec.is_peak(hr) == peak]
                weights = [by_stamp[(date, hr)] for hr in hours]
                total = sum(weights)
                shares = [w / total for w in weights] if total > 0 else [1 / len(hours)] * len(hours)
                for hr, share in zip(hours, shares):
                    stamp = dt.datetime.combine(date, dt.time(hr))
                    yield stamp, ind[k] * share, coa[k] * share

    def _interval_rows(self, members, imports):
        rows = sorted(self._interval_imports(members, imports))
        return [[s.strftime("%Y-%m-%dT%H:%M"), f"{a:.4f}", f"{b:.4f}"] for s, a, b in rows]

    def run_compare(self) -> list[list]:
        series = load_import_series(self.out, self.cfg.visibility_series)
        totals = load_import_totals(self.out)
        rows, rho = [], {}
        for mode, case in zip(MODES, ("without_p2p", "with_p2p")):
            y = series[mode]
            rho[mode], vertices, edges, status = None, len(y), "", "ok"
            if len(y) < 3 or np.ptp(y) == 0:
                status = "degenerate: constant series"
            else:
                g = visibility_graph(y)
                edges = g.edge_count
                write_atomic(self.out / "graphs" / f"visibility_{mode}.csv", write_edge_list, g)
                rho[mode], err = self._threshold(g, self.out / "curves" / f"visibility_{mode}.csv")
                status = err or status
            rows.append([case, f"{totals[mode]:.2f}", "" if rho[mode] is None else repr(rho[mode]),
                         vertices, edges, status])
        a, b = rho["individual"], rho["coalition"]
        delta_e = totals["coalition"] - totals["individual"]
        rows.append(["delta", f"{delta_e:.2f}", "" if a is None or b is None else repr(round(b - a, 12)), "", "", ""])
        pct_e = "" if totals["individual"] == 0 else f"{100 * delta_e / totals['individual']:.2f}"
        pct_r = "" if a is None or b is None or a == 0 else f"{100 * (b - a) / a:.2f}"
        rows.append(["change_pct", pct_e, pct_r, "", "", ""])
        write_csv(self.out / "compare.csv", COMPARE_HEADER, rows)
        log.info("compare: rho_c %s -> %s", a, b)
        return rows

    def run_all(self) -> None:
        self.run_partition()
        self.run_resilience()
        self.run_trade()
        self.run_compare()


def load_import_series(out: Path, kind: str = "interval") -> dict[str, np.ndarray]:
    """Grid-import series per mode from the files written by the trade step."""
    name = "grid_import_intervals.csv" if kind == "interval" else "grid_import.csv"
    path = Path(out) / name
    if not path.is_file():
        raise DataError(f"{path} not found; run the trade step first")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path} has no rows")
    return {mode: np.array([float(r[f"{mode}_kwh"]) for r in rows]) for mode in MODES}


def load_import_totals(out: Path) -> dict[str, float]:
    series = load_import_series(out, "period")
    # period values are exact hundredths of a kWh
    return {mode: round(float(np.round(series[mode] * 100).sum()) / 100, 2) for mode in MODES}

"""Microgrid partitioning, percolation-based resilience and cooperative P2P energy sharing."""

from __future__ import annotations

from .billing import DEFAULT_TARIFF, DailyBill, Tariff, cost_with_der, cost_without_der
from .coalition import (
    Allocation,
    CoalitionDay,
    allocate,
    allocate_day,
    check_core,
    check_homogeneity,
    check_subadditivity,
    coalition_cost,
    grid_import,
    match_trades,
)
from .errors import DataError, GridshareError, ValidationError
from .feeder import FeederTopology, Partition, enumerate_partitions, load_topology, partition
from .graphs import Graph, correlation_network, pearson, visibility_graph
from .percolation import PercolationConfig, percolation_curve, percolation_threshold, resilience_report
from .profiles import HouseDay, PeriodSpec, aggregate_daily, ingest_csv, synthesize_profiles

__version__ = "0.1.0"

__all__ = [
    "Allocation", "CoalitionDay", "DEFAULT_TARIFF", "DailyBill", "DataError", "FeederTopology", "Graph",
    "GridshareError", "HouseDay", "Partition", "PercolationConfig", "PeriodSpec", "Tariff", "ValidationError",
    "aggregate_daily", "allocate", "allocate_day", "check_core", "check_homogeneity", "check_subadditivity",
    "coalition_cost", "correlation_network", "cost_with_der", "cost_without_der", "enumerate_partitions",
    "grid_import", "ingest_csv", "load_topology", "match_trades", "partition", "pearson", "percolation_curve",
    "percolation_threshold", "resilience_report", "synthesize_profiles", "visibility_graph",
]

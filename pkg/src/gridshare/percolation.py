"""Monte Carlo bond percolation on a Graph: strength, susceptibility, threshold.

``p`` is the fraction of edges *removed*. For each grid value every
realization removes ``round(p * E)`` distinct edges uniformly at random and
records a cluster statistic ``S`` of what is left. With ``N`` the
normalizing count (``X`` realizations under ``standard``, ``E`` edges under
``edges``)::

    PS(p)  = sum(S) / (V * N)
    chi(p) = (sum(S^2) / (V^2 * N) - PS^2) / PS

The threshold is the interior grid value maximizing chi.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DataError, GridshareError, ValidationError
from .graphs import Graph

log = logging.getLogger(__name__)

NORMALIZATIONS = ("standard", "edges")
CLUSTER_STATISTICS = ("largest", "smallest_surviving")
CURVE_HEADER = ["p", "ps", "chi"]
REPORT_HEADER = ["label", "rho_c", "V", "E", "X", "normalization", "cluster_statistic", "seed"]


def default_grid(points: int = 41) -> tuple[float, ...]:
    if points < 2:
        raise ValidationError("a percolation grid needs at least 2 points")
    # k / (points - 1) keeps grid values free of linspace round-off (0.975, not 0.9750000000000001)
    return tuple(k / (points - 1) for k in range(points))


@dataclass(frozen=True)
class PercolationConfig:
    realizations: int = 200
    p_grid: tuple[float, ...] = field(default_factory=default_grid)
    seed: int = 0
    normalization: str = "standard"
    cluster_statistic: str = "largest"

    def __post_init__(self):
        if self.realizations < 1:
            raise ValidationError("realizations must be >= 1")
        grid = tuple(float(p) for p in self.p_grid)
        object.__setattr__(self, "p_grid", grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("p_grid must be strictly ascending")
        if not grid or grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValidationError("p_grid must start at 0 and end at 1")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(f"normalization must be one of {NORMALIZATIONS}")
        if self.cluster_statistic not in CLUSTER_STATISTICS:
            raise ValidationError(f"cluster_statistic must be one of {CLUSTER_STATISTICS}")


@dataclass(frozen=True)
class PercolationCurve:
    p: np.ndarray
    ps: np.ndarray
    chi: np.ndarray
    rho_c: float | None
    vertex_count: int
    edge_count: int
    config: PercolationConfig | None = None


def component_sizes(vertex_count: int, edges: np.ndarray) -> np.ndarray:
    """Sizes of the connected components of the graph (isolated vertices count as 1)."""
    if len(edges) == 0:
        return np.ones(vertex_count, dtype=np.int64)
    adj = coo_matrix(
        (np.ones(len(edges), dtype=np.int8), (edges[:, 0], edges[:, 1])), shape=(vertex_count, vertex_count)
    )
    _, labels = connected_components(adj, directed=False)
    return np.bincount(labels)


def cluster_statistic(sizes: np.ndarray, kind: str = "largest") -> int:
    if kind == "largest":
        return int(sizes.max())
    # smallest cluster that still holds at least one bond; all singletons -> 1
    surviving = sizes[sizes >= 2]
    return int(surviving.min()) if len(surviving) else 1


def removed_count(p: float, edge_count: int) -> int:
    # half-up rounding; Python's round() is banker's
    return min(edge_count, int(math.floor(p * edge_count + 0.5)))


def sample_statistics(g: Graph, cfg: PercolationConfig) -> np.ndarray:
    """Raw ``S_m(p)`` values, shape ``(len(p_grid), realizations)``.

    Realization ``m`` at grid index ``k`` draws from its own substream seeded
    by ``(seed, k, m)``, so values do not depend on evaluation order.
    """
    edges = g.edge_array()
    E, V = g.edge_count, g.vertex_count
    out = np.empty((len(cfg.p_grid), cfg.realizations), dtype=np.int64)
    for k, p in enumerate(cfg.p_grid):
        e = removed_count(p, E)
        for m in range(cfg.realizations):
            if e == 0:
                kept = edges
            elif e == E:
                kept = edges[:0]
            else:
                rng = np.random.default_rng([cfg.seed, k, m])
                kept = edges[rng.permutation(E)[e:]]
            out[k, m] = cluster_statistic(component_sizes(V, kept), cfg.cluster_statistic)
    return out


def strength_and_susceptibility(samples: np.ndarray, vertex_count: int, norm_count: int):
    """PS and chi per grid row from integer samples; chi is 0 where PS is 0."""
    total = [int(v) for v in samples.sum(axis=1)]
    squares = [int(v) for v in (samples.astype(object) ** 2).sum(axis=1)]
    ps = np.array([t / (vertex_count * norm_count) for t in total])
    # (sum S^2/(V^2 N) - PS^2)/PS == (N sum S^2 - (sum S)^2) / (V N sum S), exact numerator
    chi = np.array([
        (norm_count * sq - t * t) / (vertex_count * norm_count * t) if t else 0.0
        for t, sq in zip(total, squares)
    ])
    return ps, chi


def percolation_curve(g: Graph, cfg: PercolationConfig | None = None) -> PercolationCurve:
    cfg = cfg or PercolationConfig()
    if g.vertex_count == 0 or g.edge_count == 0:
        raise DataError("percolation needs a graph with at least one edge")
    if len(component_sizes(g.vertex_count, g.edge_array())) != 1:
        raise DataError("percolation needs a connected graph")
    samples = sample_statistics(g, cfg)
    norm = cfg.realizations if cfg.normalization == "standard" else g.edge_count
    ps, chi = strength_and_susceptibility(samples, g.vertex_count, norm)
    p = np.array(cfg.p_grid)
    try:
        rho = _argmax_interior(p, chi)
    except DataError:
        rho = None
    return PercolationCurve(p, ps, chi, rho, g.vertex_count, g.edge_count, cfg)


def _argmax_interior(p: Sequence[float], chi: Sequence[float]) -> float:
    best = None
    for pk, ck in zip(p, chi):
        if pk <= 0.0 or pk >= 1.0:
            continue
        if best is None or ck > best[1]:
            best = (pk, ck)
    if best is None or best[1] == 0:
        raise DataError("susceptibility is zero everywhere: no percolation threshold")
    return float(best[0])


def percolation_threshold(curve: PercolationCurve) -> float:
    """Removed-edge fraction maximizing chi, endpoints excluded, ties to the smaller p."""
    if len(curve.p) == 0:
        raise ValidationError("empty percolation curve")
    return _argmax_interior(curve.p, curve.chi)


@dataclass(frozen=True)
class ReportRow:
    label: str
    rho_c: float | None
    vertex_count: int
    edge_count: int
    realizations: int
    normalization: str
    cluster_statistic: str
    seed: int
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.rho_c is not None


def resilience_report(graphs: Iterable[tuple[str, Graph]], cfg: PercolationConfig | None = None,
                      curves: dict | None = None) -> list[ReportRow]:
    """Threshold per labeled graph; a failing graph yields a row with ``error`` set.

    If ``curves`` is a dict, successful curves are stored in it by label.
    """
    cfg = cfg or PercolationConfig()
    rows = []
    for label, g in graphs:
        rho, err = None, ""
        try:
            curve = percolation_curve(g, cfg)
            rho = percolation_threshold(curve)
            if curves is not None:
                curves[label] = curve
        except GridshareError as exc:
            err = str(exc)
            log.warning("percolation failed for %s: %s", label, exc)
        rows.append(ReportRow(label, rho, g.vertex_count, g.edge_count, cfg.realizations,
                              cfg.normalization, cfg.cluster_statistic, cfg.seed, err))
    return rows


def write_curve_csv(path, curve: PercolationCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for p, ps, chi in zip(curve.p, curve.ps, curve.chi):
            writer.writerow([repr(float(p)), repr(float(ps)), repr(float(chi))])


def write_report_csv(path, rows: Sequence[ReportRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in rows:
            writer.writerow([r.label, "" if r.rho_c is None else repr(r.rho_c), r.vertex_count, r.edge_count,
                             r.realizations, r.normalization, r.cluster_statistic, r.seed])

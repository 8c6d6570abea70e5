"""Complex networks built from power time-series.

Two constructions: Pearson-correlation networks over a set of series
(vertex per series, edge when the correlation clears a threshold) and natural
visibility graphs over a single series (vertex per sample).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``0..vertex_count-1``.

    Each edge is stored smaller endpoint first. Edge order is preserved as
    given, which keeps seeded edge sampling reproducible.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __init__(self, vertex_count: int, edges: Iterable[Sequence[int]] = ()):
        if vertex_count < 0:
            raise ValidationError("vertex_count must be >= 0")
        norm = []
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValidationError(f"self-loop at vertex {u}")
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise ValidationError(f"edge ({u}, {v}) outside 0..{vertex_count - 1}")
            pair = (u, v) if u < v else (v, u)
            if pair in seen:
                raise ValidationError(f"duplicate edge {pair}")
            seen.add(pair)
            norm.append(pair)
        object.__setattr__(self, "vertex_count", vertex_count)
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edges)

    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    def is_connected(self) -> bool:
        from .percolation import component_sizes

        if self.vertex_count == 0:
            return False
        return len(component_sizes(self.vertex_count, self.edge_array())) == 1


def write_edge_list(path, g: Graph) -> None:
    with open(path, "w") as fh:
        fh.write(f"# vertices={g.vertex_count}\n")
        fh.write("u,v\n")
        for u, v in g.edges:
            fh.write(f"{u},{v}\n")


def read_edge_list(path) -> Graph:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# vertices="):
        raise ValidationError(f"{path}:1: expected '# vertices=<V>' header")
    try:
        count = int(lines[0].split("=", 1)[1])
    except ValueError:
        raise ValidationError(f"{path}:1: bad vertex count") from None
    if len(lines) < 2 or lines[1].strip() != "u,v":
        raise ValidationError(f"{path}:2: expected 'u,v' header")
    edges = []
    for n, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            u, v = line.split(",")
            edges.append((int(u), int(v)))
        except ValueError:
            raise ValidationError(f"{path}:{n}: malformed edge {line!r}") from None
    return Graph(count, edges)


# -- correlation networks --------------------------------------------------------------

def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of two equal-length series, clamped to [-1, 1]."""
    if len(x) != len(y):
        raise ValidationError(f"series lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValidationError("series need at least 2 samples")
    mx = math.fsum(x) / len(x)
    my = math.fsum(y) / len(y)
    dx = [a - mx for a in x]
    dy = [b - my for b in y]
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0 or syy == 0:
        raise ValidationError("zero-variance series: correlation undefined")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    return min(1.0, max(-1.0, sxy / math.sqrt(sxx * syy)))


def correlation_matrix(series) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise Pearson matrix of the rows of ``series``.

    Returns ``(matrix, degenerate)`` where ``degenerate`` flags zero-variance
    rows. Their rows and columns are zero off the diagonal; the diagonal is 1
    everywhere.
    """
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
        raise ValidationError("need at least 2 series of at least 2 samples each")
    if not np.all(np.isfinite(data)):
        raise ValidationError("series contain non-finite values")
    centered = data - data.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", centered, centered))
    degenerate = norms == 0
    unit = np.divide(centered, norms[:, None], out=np.zeros_like(centered), where=~degenerate[:, None])
    corr = np.clip(unit @ unit.T, -1.0, 1.0)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return corr, degenerate


def correlation_network(series, threshold: float = 0.7, absolute: bool = True) -> Graph:
    """Threshold the correlation matrix: edge (i, j) iff |PC| >= threshold.

    With ``absolute=False`` only positive correlations count. Zero-variance
    series become isolated vertices and a warning is logged.
    """
    if not 0 <= threshold <= 1:
        raise ValidationError("threshold must lie in [0, 1]")
    corr, degenerate = correlation_matrix(series)
    if degenerate.any():
        log.warning("zero-variance series %s get no edges", np.flatnonzero(degenerate).tolist())
    score = np.abs(corr) if absolute else corr
    ok = ~degenerate
    iu, ju = np.triu_indices(corr.shape[0], k=1)
    keep = (score[iu, ju] >= threshold) & ok[iu] & ok[ju]
    return Graph(corr.shape[0], zip(iu[keep].tolist(), ju[keep].tolist()))


# -- visibility graphs -----------------------------------------------------------------

def _check_series(y, x):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or len(y) < 1:
        raise ValidationError("series must be one-dimensional with at least one sample")
    if x is None:
        x = np.arange(len(y), dtype=float)
    else:
        x = np.asarray(x, dtype=float)
        if x.shape != y.shape:
            raise ValidationError(f"x has length {len(x)}, y has length {len(y)}")
        if len(x) > 1 and not np.all(np.diff(x) > 0):
            raise ValidationError("x must be strictly increasing")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
        raise ValidationError("series contain non-finite values")
    return y, x


def visibility_graph(y, x=None) -> Graph:
    """Natural visibility graph of a series.

    Samples i < j see each other iff every intermediate sample lies strictly
    below the straight line joining them; collinear points block. For each i
    the sweep keeps the running maximum slope seen from i, so j is visible
    exactly when its slope beats every earlier one.
    """
    y, x = _check_series(y, x)
    n = len(y)
    edges = []
    for i in range(n - 1):
        slopes = (y[i + 1:] - y[i]) / (x[i + 1:] - x[i])
        best = np.maximum.accumulate(slopes)
        visible = np.empty(len(slopes), dtype=bool)
        visible[0] = True
        visible[1:] = slopes[1:] > best[:-1]
        js = np.flatnonzero(visible) + i + 1
        edges.extend((i, int(j)) for j in js)
    return Graph(n, edges)


def visibility_graph_bruteforce(y, x=None) -> Graph:
    """Literal triple loop over (i, k, j); test oracle for :func:`visibility_graph`."""
    y, x = _check_series(y, x)
    y, x = y.tolist(), x.tolist()
    n = len(y)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if all(y[k] < y[j] + (y[i] - y[j]) * (x[j] - x[k]) / (x[j] - x[i]) for k in range(i + 1, j)):
                edges.append((i, j))
    return Graph(n, edges)

from __future__ import annotations

import itertools

import numpy as np
import pytest

from gridshare.errors import DataError, ValidationError
from gridshare.graphs import Graph
from gridshare.percolation import (
    PercolationConfig,
    PercolationCurve,
    cluster_statistic,
    component_sizes,
    default_grid,
    percolation_curve,
    percolation_threshold,
    removed_count,
    resilience_report,
    sample_statistics,
    strength_and_susceptibility,
    write_curve_csv,
    write_report_csv,
)
from gridshare.unionfind import UnionFind


def lattice(n: int) -> Graph:
    idx = lambda r, c: r * n + c
    edges = [(idx(r, c), idx(r, c + 1)) for r in range(n) for c in range(n - 1)]
    edges += [(idx(r, c), idx(r + 1, c)) for r in range(n - 1) for c in range(n)]
    return Graph(n * n, edges)


def curve_of(p, chi) -> PercolationCurve:
    p = np.array(p, dtype=float)
    return PercolationCurve(p, np.zeros_like(p), np.array(chi, dtype=float), None, 1, 1)


def test_default_grid_is_exact() -> None:
    grid = default_grid(41)
    assert len(grid) == 41 and grid[0] == 0.0 and grid[-1] == 1.0
    assert grid[20] == 0.5 and grid[39] == 0.975


def test_removed_count_rounds_half_up() -> None:
    assert removed_count(0.5, 3) == 2
    assert removed_count(0.25, 2) == 1
    assert removed_count(1.0, 7) == 7


def test_component_sizes_match_union_find() -> None:
    rng = np.random.default_rng(2)
    for _ in range(100):
        v = int(rng.integers(1, 30))
        pairs = [(a, b) for a, b in itertools.combinations(range(v), 2) if rng.random() < 0.1]
        uf = UnionFind(v)
        for a, b in pairs:
            uf.union(a, b)
        expected = sorted(len(g) for g in uf.groups())
        got = sorted(component_sizes(v, np.array(pairs, dtype=np.int64).reshape(-1, 2)).tolist())
        assert got == expected


def test_cluster_statistics() -> None:
    sizes = np.array([1, 4, 2, 1])
    assert cluster_statistic(sizes, "largest") == 4
    assert cluster_statistic(sizes, "smallest_surviving") == 2
    assert cluster_statistic(np.array([1, 1]), "smallest_surviving") == 1


def test_single_edge_graph() -> None:
    cfg = PercolationConfig(realizations=50, p_grid=(0.0, 0.5, 1.0))
    samples = sample_statistics(Graph(2, [(0, 1)]), cfg)
    assert samples[0].tolist() == [2] * 50
    assert samples[-1].tolist() == [1] * 50
    # with E=1, p=0.5 already removes round(0.5)=1 edge; compare distinct removal counts
    curve = percolation_curve(Graph(2, [(0, 1)]), PercolationConfig(realizations=50, p_grid=(0.0, 1.0)))
    assert curve.ps.tolist() == [1.0, 0.5]


def test_triangle_one_third_has_zero_susceptibility() -> None:
    cfg = PercolationConfig(realizations=300, p_grid=(0.0, 1 / 3, 1.0))
    curve = percolation_curve(Graph(3, [(0, 1), (1, 2), (0, 2)]), cfg)
    assert curve.chi[1] == 0.0
    assert curve.ps[1] == 1.0
    # chi vanishes on the whole interior, so there is no threshold
    assert curve.rho_c is None
    with pytest.raises(DataError):
        percolation_threshold(curve)


def test_strength_and_susceptibility_oracle() -> None:
    samples = np.array([[4, 4, 4], [4, 2, 1], [1, 1, 1]])
    v, n = 4, 3
    ps, chi = strength_and_susceptibility(samples, v, n)
    for k, row in enumerate(samples):
        s = row.astype(float)
        ps_k = s.sum() / (v * n)
        chi_k = ((s ** 2).sum() / (v * v * n) - ps_k ** 2) / ps_k
        assert ps[k] == pytest.approx(ps_k, rel=1e-12)
        assert chi[k] == pytest.approx(chi_k, rel=1e-12, abs=1e-15)
    assert chi[0] == 0.0 and chi[2] == 0.0 and chi[1] > 0


def test_threshold_argmax_and_tie_rule() -> None:
    assert percolation_threshold(curve_of([0, 0.25, 0.5, 0.75, 1], [0, 1, 3, 2, 0])) == 0.5
    assert percolation_threshold(curve_of([0, 1 / 3, 2 / 3, 1], [0, 2, 2, 0])) == 1 / 3
    # endpoints never win even when larger
    assert percolation_threshold(curve_of([0, 0.5, 1], [9, 1, 9])) == 0.5
    with pytest.raises(ValidationError):
        percolation_threshold(curve_of([], []))


def test_strength_endpoints() -> None:
    g = lattice(5)
    for norm in ("standard", "edges"):
        cfg = PercolationConfig(realizations=20, p_grid=default_grid(11), seed=1, normalization=norm)
        curve = percolation_curve(g, cfg)
        n = cfg.realizations if norm == "standard" else g.edge_count
        assert curve.ps[0] == curve.ps.max()
        assert curve.ps[-1] == pytest.approx(cfg.realizations / (g.vertex_count * n), rel=1e-12)


def test_strength_non_increasing_within_band() -> None:
    curve = percolation_curve(lattice(10), PercolationConfig(realizations=200, p_grid=default_grid(21), seed=4))
    assert np.all(np.diff(curve.ps) <= 0.02)


def test_lattice_threshold_near_one_half() -> None:
    cfg = PercolationConfig(realizations=60, p_grid=default_grid(21), seed=3)
    assert abs(percolation_threshold(percolation_curve(lattice(12), cfg)) - 0.5) <= 0.1


def test_seeded_determinism_and_seed_sensitivity() -> None:
    g = lattice(6)
    cfg = PercolationConfig(realizations=30, p_grid=default_grid(11), seed=9)
    a, b = sample_statistics(g, cfg), sample_statistics(g, cfg)
    assert np.array_equal(a, b)
    c = sample_statistics(g, PercolationConfig(realizations=30, p_grid=default_grid(11), seed=10))
    assert not np.array_equal(a, c)


def test_relabeling_preserves_threshold() -> None:
    g = lattice(6)
    perm = np.random.default_rng(0).permutation(g.vertex_count)
    relabeled = Graph(g.vertex_count, [(int(perm[u]), int(perm[v])) for u, v in g.edges])
    cfg = PercolationConfig(realizations=40, p_grid=default_grid(11), seed=2)
    assert percolation_curve(relabeled, cfg).rho_c == percolation_curve(g, cfg).rho_c
    assert np.array_equal(percolation_curve(relabeled, cfg).ps, percolation_curve(g, cfg).ps)


def test_invalid_inputs() -> None:
    with pytest.raises(DataError, match="connected"):
        percolation_curve(Graph(4, [(0, 1), (2, 3)]))
    with pytest.raises(DataError):
        percolation_curve(Graph(3, []))
    with pytest.raises(ValidationError):
        PercolationConfig(realizations=0)
    with pytest.raises(ValidationError):
        PercolationConfig(p_grid=(0.0, 0.5))
    with pytest.raises(ValidationError):
        PercolationConfig(normalization="other")


def test_resilience_report_rows_and_failures(tmp_path) -> None:
    cfg = PercolationConfig(realizations=20, p_grid=default_grid(11), seed=5)
    g = lattice(4)
    curves = {}
    rows = resilience_report([("a", g), ("b", g), ("broken", Graph(3, [(0, 1)]))], cfg, curves)
    assert rows[0].rho_c == rows[1].rho_c is not None
    assert not rows[2].ok and "connected" in rows[2].error
    assert sorted(curves) == ["a", "b"]
    write_report_csv(tmp_path / "r.csv", rows)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "label,rho_c,V,E,X,normalization,cluster_statistic,seed"
    assert lines[3].startswith("broken,,3,1,")
    write_curve_csv(tmp_path / "c.csv", curves["a"])
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 12

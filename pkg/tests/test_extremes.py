import math

import numpy as np
import pytest
from scipy import stats
from scipy.spatial import Voronoi

from voronoi_extremes.distributions import theory_cdf
from voronoi_extremes.errors import ContractError
from voronoi_extremes.extremes import (
    cell_extremes,
    line_half_gaps,
    process_window_2d,
    run_1d_experiment,
    run_2d_experiment,
)
from voronoi_extremes.geometry import cell_table, triangulate, voronoi_cells
from voronoi_extremes.ppp import SimConfig1D, SimConfig2D, sample_window_2d


def triangular_lattice(rows=7, cols=7):
    pts = [(j + 0.5 * (i % 2), i * math.sqrt(3) / 2) for i in range(rows) for j in range(cols)]
    return np.array(pts)


def test_hexagonal_cell_extremes():
    # spacing sqrt(3) puts every hexagon vertex at distance 1 from its generator
    pts = triangular_lattice() * math.sqrt(3)
    tri = triangulate(pts)
    center = 3 * 7 + 3
    cell = voronoi_cells(tri)[center]
    assert len(cell.vertices) == 6
    rec = cell_extremes(cell, pts, lam=1.0)
    assert rec.r_min_norm == pytest.approx(1.0, abs=1e-12)
    assert rec.r_max_norm == pytest.approx(1.0, abs=1e-12)


def test_square_cell_extremes_scale_with_intensity():
    pts = np.array([(i, j) for i in range(3) for j in range(3)], dtype=float)
    tri = triangulate(pts)
    cell = voronoi_cells(tri)[4]
    assert cell.interior and len(cell.vertices) == 4
    rec = cell_extremes(cell, pts, lam=4.0)
    # half-diagonal of the unit square is sqrt(1/2); times sqrt(4)
    assert rec.r_min_norm == pytest.approx(math.sqrt(2), abs=1e-12)
    assert rec.r_max_norm == pytest.approx(math.sqrt(2), abs=1e-12)


def test_cell_extremes_rejects_boundary_cell():
    pts = np.array([(i, j) for i in range(3) for j in range(3)], dtype=float)
    tri = triangulate(pts)
    with pytest.raises(ContractError):
        cell_extremes(voronoi_cells(tri)[0], pts, lam=1.0)


def test_window_extremes_match_independent_voronoi():
    cfg = SimConfig2D(lam=2.0, area=500.0, windows=1, seed=3, guard=0.0)
    pts = sample_window_2d(cfg, 0)
    tri = triangulate(pts)
    table = cell_table(tri, cfg.side)
    interior = np.nonzero(table.interior)[0]
    assert interior.size > 100
    vor = Voronoi(pts)
    lo, hi = [], []
    for i in interior:
        region = vor.regions[vor.point_region[i]]
        assert -1 not in region
        d = np.hypot(*(vor.vertices[region] - pts[i]).T) * math.sqrt(cfg.lam)
        lo.append(d.min())
        hi.append(d.max())
    res = process_window_2d(cfg, 0)
    assert res.interior == interior.size
    assert np.allclose(res.r_min, lo, rtol=1e-9)
    assert np.allclose(res.r_max, hi, rtol=1e-9)


def test_window_extremes_dominance_and_positivity():
    res = process_window_2d(SimConfig2D(area=5000.0, seed=9), 0)
    assert res.interior > 3000
    assert np.all(res.r_min > 0)
    assert np.all(res.r_min <= res.r_max)
    assert res.distances.size == res.vertex_total
    assert res.r_min.min() >= res.distances.min() and res.r_max.max() <= res.distances.max()


@pytest.fixture(scope="module")
def small_run():
    cfg = SimConfig2D(area=2e4, windows=4, seed=11)
    return cfg, run_2d_experiment(cfg, bins=1024)


def test_run_2d_structure(small_run):
    cfg, (r_min, r_max, r_bar, report) = small_run
    assert r_min.n == r_max.n == report.interior_cells > 0
    assert r_bar.n == report.vertex_distance_samples
    assert report.mean_vertex_count == pytest.approx(r_bar.n / r_min.n)
    assert 5.8 < report.mean_vertex_count < 6.2
    assert 0 < report.interior_fraction < 1
    assert report.generated_cells > report.interior_cells
    assert report.empty_windows == []
    assert report.guard == cfg.effective_guard
    assert "shards" not in report.config
    assert "wall_time_s" not in report.to_dict(include_timing=False)
    assert r_min.overflow == 0 and r_max.overflow == 0


def test_run_2d_vertex_distances_follow_closed_form(small_run):
    _, (_, _, r_bar, _) = small_run
    sup = np.max(np.abs(r_bar.ecdf_on_grid() - theory_cdf("vertex2d", r_bar.grid)))
    # ~4.7e5 distances, three-per-vertex dependence; generous DKW-style bound
    assert sup < 0.006


def test_run_2d_shard_invariance(small_run):
    cfg, (r_min, r_max, r_bar, report) = small_run
    cfg4 = SimConfig2D(area=cfg.area, windows=cfg.windows, seed=cfg.seed, shards=3)
    r_min4, r_max4, r_bar4, report4 = run_2d_experiment(cfg4, bins=1024)
    assert r_min4.to_dict() == r_min.to_dict()
    assert r_max4.to_dict() == r_max.to_dict()
    assert r_bar4.to_dict() == r_bar.to_dict()
    assert report4.to_dict(include_timing=False) == report.to_dict(include_timing=False)


def test_scaling_invariance_of_normalized_distances():
    a = process_window_2d(SimConfig2D(lam=1.0, area=2e4, seed=1), 0)
    b = process_window_2d(SimConfig2D(lam=25.0, area=2e4 / 25, seed=2), 0)
    assert stats.ks_2samp(a.r_min, b.r_min).pvalue > 1e-3
    assert stats.ks_2samp(a.r_max, b.r_max).pvalue > 1e-3


def test_line_half_gaps_example():
    dmin, dmax = line_half_gaps(np.array([0.0, 1.0, 3.0, 6.0]), lam=1.0)
    assert np.array_equal(dmin, [0.5, 1.0])
    assert np.array_equal(dmax, [1.0, 1.5])
    dmin2, dmax2 = line_half_gaps(np.array([0.0, 1.0, 3.0, 6.0]) / 2, lam=2.0)
    assert np.array_equal(dmin2, dmin) and np.array_equal(dmax2, dmax)


def test_run_1d_matches_closed_forms():
    d_min, d_max, report = run_1d_experiment(SimConfig1D(length=1e6, seed=4), bins=2048)
    n = d_min.n
    assert n == d_max.n == report.interior_cells
    assert report.generated_cells - n == 2
    dkw = math.sqrt(math.log(2 / 1e-4) / (2 * n))
    assert report.sup_distance_to_theory["min1d"] < dkw + d_min.width
    assert report.sup_distance_to_theory["max1d"] < dkw + d_max.width
    m1, _ = d_min.moments()
    m2, _ = d_max.moments()
    # E[D_min] = 1/4 and E[D_max] = 3/4 under the 1D closed forms
    assert m1 == pytest.approx(0.25, abs=0.002)
    assert m2 == pytest.approx(0.75, abs=0.004)


def test_run_1d_shard_invariance():
    a = run_1d_experiment(SimConfig1D(length=1e4, windows=5, seed=8), bins=256)
    b = run_1d_experiment(SimConfig1D(length=1e4, windows=5, seed=8, shards=2), bins=256)
    assert a[0].to_dict() == b[0].to_dict() and a[1].to_dict() == b[1].to_dict()

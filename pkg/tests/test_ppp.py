import math

import numpy as np
import pytest
from scipy import stats

from voronoi_extremes.errors import ConfigError
from voronoi_extremes.ppp import (
    SimConfig1D,
    SimConfig2D,
    poisson_sample,
    sample_line_1d,
    sample_window_2d,
    window_rng,
)


def test_vanishing_mean_gives_zero():
    rng = window_rng(1, 0)
    assert all(poisson_sample(1e-12, rng) == 0 for _ in range(1000))


def test_poisson_mean_and_variance():
    rng = window_rng(2, 0)
    draws = np.array([poisson_sample(4.0, rng) for _ in range(10 ** 6)])
    assert abs(draws.mean() - 4.0) <= 0.01
    assert abs(draws.var() - 4.0) <= 0.05


def test_poisson_pmf_total_variation_at_mean_50():
    rng = window_rng(4, 0)
    draws = rng.poisson(50.0, 10 ** 6)
    k = np.arange(0, 200)
    emp = np.bincount(draws, minlength=k.size)[: k.size] / draws.size
    # exact pmf by direct evaluation in log space
    exact = np.exp(k * math.log(50.0) - 50.0 - np.array([math.lgamma(i + 1) for i in k]))
    assert 0.5 * np.abs(emp - exact).sum() <= 0.01


@pytest.mark.parametrize("mean", [0.0, -1.0, float("nan"), float("inf")])
def test_poisson_bad_mean(mean):
    with pytest.raises(ConfigError):
        poisson_sample(mean, window_rng(0, 0))


def test_window_counts_mean():
    cfg = SimConfig2D(lam=1.0, area=1e4, windows=100, seed=5)
    counts = np.array([len(sample_window_2d(cfg, w)) for w in range(cfg.windows)])
    assert abs(counts.mean() - 1e4) <= 30
    # over many windows both mean and variance equal lambda*A within 5 standard errors
    se_var = 1e4 * math.sqrt(2.0 / counts.size)
    assert abs(counts.var(ddof=1) - 1e4) <= 5 * se_var


def test_window_points_in_range_and_deterministic():
    cfg = SimConfig2D(lam=2.0, area=500.0, seed=77)
    a = sample_window_2d(cfg, 3)
    b = sample_window_2d(cfg, 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[:10], sample_window_2d(cfg, 4)[:10])
    assert a.min() >= 0 and a.max() <= cfg.side


def test_window_uniformity_chi_square():
    cfg = SimConfig2D(lam=1.0, area=1e5, seed=9)
    pts = sample_window_2d(cfg, 0)
    h, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=10, range=[[0, cfg.side]] * 2)
    assert stats.chisquare(h.ravel()).pvalue > 1e-3


def test_window_marginal_ks_within_dkw():
    cfg = SimConfig2D(lam=1.0, area=1e5, seed=10)
    x = sample_window_2d(cfg, 0)[:, 0]
    d = stats.kstest(x / cfg.side, "uniform").statistic
    dkw = math.sqrt(math.log(2 / 0.01) / (2 * x.size))
    assert d <= dkw


def test_line_gaps_exponential():
    cfg = SimConfig1D(lam=1.0, length=1e6, seed=11)
    pos = sample_line_1d(cfg, 0)
    assert np.all(np.diff(pos) >= 0)
    gaps = np.sort(np.diff(pos))
    n = gaps.size
    ecdf_hi = np.arange(1, n + 1) / n
    theory = -np.expm1(-gaps)
    assert max(np.max(ecdf_hi - theory), np.max(theory - (ecdf_hi - 1 / n))) <= 0.005


def test_line_deterministic():
    cfg = SimConfig1D(lam=0.5, length=1e3, seed=12)
    assert np.array_equal(sample_line_1d(cfg, 0), sample_line_1d(cfg, 0))


def test_streams_independent_of_dimension_tag():
    # the same (seed, window) feeds different streams in 1D and 2D
    a = window_rng(1, 0, stream=1).random(4)
    b = window_rng(1, 0, stream=2).random(4)
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("kwargs", [
    dict(lam=0.0), dict(lam=-1.0), dict(area=0.0), dict(windows=0), dict(shards=0),
    dict(seed=-1), dict(lam=1.0, area=99.0), dict(lam=float("nan")), dict(guard=-1.0),
    dict(area=400.0, guard=10.0),
])
def test_config2d_validation(kwargs):
    with pytest.raises(ConfigError):
        SimConfig2D(**kwargs)


def test_config2d_guard_defaults():
    assert SimConfig2D().effective_guard == 8.0
    small = SimConfig2D(lam=1.0, area=100.0)
    assert small.effective_guard == pytest.approx(2.5)
    assert SimConfig2D(lam=4.0, area=1e4).guard_length == pytest.approx(4.0)


@pytest.mark.parametrize("kwargs", [dict(lam=0.0), dict(length=-1.0), dict(windows=0)])
def test_config1d_validation(kwargs):
    with pytest.raises(ConfigError):
        SimConfig1D(**kwargs)

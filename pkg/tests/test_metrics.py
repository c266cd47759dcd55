import math

import numpy as np
import pytest
from scipy.integrate import quad

from hngraph import metrics as M
from hngraph.core import LevelAssignment, Params, build_from_levels, build_graph, build_radius_bounded
from hngraph.errors import ParameterError, ThresholdNotFoundError
from hngraph.geometry import PointSet, Region, uniform_points

SQ = Region("square", 10.0)


def forced(xy, levels, region=SQ):
    pts = PointSet(np.array(xy, dtype=float).reshape(-1, 2), region)
    return build_from_levels(pts, LevelAssignment(np.array(levels, dtype=int), np.zeros(len(levels), dtype=int)))


# -- histograms ---------------------------------------------------------------


def test_histogram_consistency():
    x = np.random.default_rng(0).normal(size=500)
    h = M.Histogram.of(x, np.linspace(-5, 5, 21))
    assert h.counts.sum() == h.n == 500
    assert h.mean == pytest.approx(x.mean())
    assert h.var == pytest.approx(x.var(ddof=1))


def test_degree_stats_examples():
    h1 = M.degree_stats(forced([[1, 1]], [0]))
    assert h1.n == 1 and h1.counts.tolist() == [1]
    h2 = M.degree_stats(forced([[1, 1], [2, 2]], [0, 1]))
    assert h2.counts.tolist() == [0, 2]


def test_edge_length_single_bucket():
    h = M.edge_length_stats(forced([[1, 1], [4, 5]], [0, 1]))
    assert h.n == 1 and h.mean == 5.0
    nonzero = [(lo, hi) for lo, hi, c in h.rows() if c]
    assert len(nonzero) == 1 and nonzero[0][0] <= 5.0 < nonzero[0][1]


def test_edges_shorten_with_density():
    region = Region("torus", 10.0)
    def med(lam):
        return np.median(np.concatenate([
            M.edge_lengths(build_graph(M.poisson_points(region, lam, s), seed=s)) for s in range(3)]))
    assert med(500.0) < med(100.0)


# -- direct-edge bound ---------------------------------------------------------------


def oracle_bound(l, lam, p):
    """Integral of the summand plus its maximum, evaluated numerically."""
    a = lam * math.pi * l * l
    f = lambda x: p ** (2 * x) * math.exp(-a * p ** (x + 1))
    integral, _ = quad(f, 0, math.inf, limit=200)
    peak = 4 / (math.e**2 * (a * p) ** 2)
    return 2 * (1 - p) * (integral + peak)


def exact_series(l, lam, p, terms=400):
    a = lam * math.pi * l * l
    return 2 * (1 - p) * math.fsum(p ** (2 * i) * math.exp(-a * p ** (i + 1)) for i in range(terms))


@pytest.mark.parametrize("l,lam,p", [(1, 1, 0.5), (0.5, 5, 0.5), (1, 5, 0.5), (2, 5, 0.5), (0.3, 2, 0.3), (1, 10, 0.8)])
def test_direct_edge_bound_matches_oracle_and_dominates_series(l, lam, p):
    b = M.direct_edge_prob_bound(l, lam, p)
    assert b == pytest.approx(oracle_bound(l, lam, p), rel=1e-7)
    assert b >= exact_series(l, lam, p)


def test_direct_edge_bound_hand_value():
    # x = pi/2: 2*0.5/x^2 * ((1 - e^-x (x + 1)) / ln 2 + 4/e^2)
    x = math.pi / 2
    assert M.direct_edge_prob_bound(1, 1, 0.5) == pytest.approx(0.4916253, abs=1e-6)
    assert M.direct_edge_prob_bound(1, 1, 0.5) == pytest.approx(
        (1 / x**2) * ((1 - math.exp(-x) * (x + 1)) / math.log(2) + 4 / math.e**2))


def test_direct_edge_bound_shape_and_domain():
    assert M.direct_edge_prob_bound(2, 1, 0.5) < M.direct_edge_prob_bound(1, 1, 0.5)
    assert M.direct_edge_prob_bound(1e3, 1, 0.5) < 1e-12
    # tiny arguments must not cancel catastrophically
    assert math.isfinite(M.direct_edge_prob_bound(1e-6, 1, 0.5))
    for args in [(0, 1, 0.5), (1, 0, 0.5), (1, 1, 1.0), (-1, 1, 0.5)]:
        with pytest.raises(ParameterError):
            M.direct_edge_prob_bound(*args)


# -- connectivity ----------------------------------------------------------------------


def test_is_connected_examples():
    assert M.is_connected(forced([], []))
    pts = PointSet(np.array([[1.0, 1.0], [6.0, 1.0]]), SQ)
    g = build_from_levels(pts, LevelAssignment(np.array([0, 1]), np.zeros(2, dtype=int)), radius_limit=2.0)
    assert not M.is_connected(g)


@pytest.mark.parametrize("seed", range(10))
def test_is_connected_matches_union_find(seed):
    pts = uniform_points(SQ, 150, seed)
    for r in (0.5, 1.0, 2.0, math.inf):
        g = build_radius_bounded(pts, None, Params(0.5), r, seed=seed)
        assert M.is_connected(g) == M.connected_by_union_find(g)


def test_union_find():
    uf = M.UnionFind(5)
    assert uf.union(0, 1) and uf.union(3, 4) and not uf.union(1, 0)
    assert uf.sets == 3 and uf.find(1) == uf.find(0) != uf.find(3)


# -- lambda_min --------------------------------------------------------------------------


def test_lambda_min_with_unbinding_radius():
    # r beyond the diameter never binds: only "at least one point per trial" matters
    region = Region("square", 1.0)
    res = M.find_lambda_min(20.0, 0.5, region, step=0.5, trials=3, seed=1, lam_cap=100.0)
    assert res.increments_checked == 10

    def occupied(j):
        return all(len(M.poisson_points(region, j * 0.5, M.derive_seed(1, "lambda", j, t))) > 0 for t in range(3))

    j = 1
    while not all(occupied(j + k) for k in range(11)):
        j += 1
    assert res.lambda_min == j * 0.5


def test_lambda_min_reproducible():
    a = M.find_lambda_min(1.6, 0.5, SQ, step=0.5, trials=2, seed=3)
    b = M.find_lambda_min(1.6, 0.5, SQ, step=0.5, trials=2, seed=3)
    assert a == b


def test_lambda_min_cap():
    with pytest.raises(ThresholdNotFoundError):
        M.find_lambda_min(1.0, 0.5, SQ, step=0.5, trials=2, seed=0, lam_cap=2.0)
    with pytest.raises(ParameterError):
        M.find_lambda_min(0.0)


# -- hops, stretch, height -------------------------------------------------------------------


def test_hop_stats_small_cases():
    g = forced([[1, 1], [2, 1]], [0, 1])
    hs = M.hop_stats(g, bucket_width=0.5)
    assert hs.hops.n == 1 and hs.hops.mean == 1.0 and hs.unreachable == 0


def test_hop_stats_reports_unreachable():
    pts = PointSet(np.array([[1.0, 1.0], [6.0, 1.0], [6.5, 1.0]]), SQ)
    g = build_from_levels(pts, LevelAssignment(np.array([0, 1, 0]), np.zeros(3, dtype=int)), radius_limit=1.0)
    assert M.hop_stats(g).unreachable == 2


def test_hops_grow_sublinearly():
    region = Region("torus", 20.0)
    g = build_graph(M.poisson_points(region, 10.0, 5), seed=5)
    hs = M.hop_stats(g, seed=1, bucket_width=1.0)
    means = hs.bucket_mean_hops
    assert means[8] / means[4] < 2.0
    assert means[4] < means[8]


def test_stretch_at_least_one():
    region = Region("torus", 1.0)
    g = build_graph(M.poisson_points(region, 300.0, 2), seed=2)
    s = M.stretch_samples(g, 0.1, 0.01)
    assert len(s) > 0 and np.all(s >= 1 - 1e-12)


def test_stretch_requires_torus_and_pairs():
    g = build_graph(uniform_points(SQ, 30, 0), seed=0)
    with pytest.raises(ParameterError):
        M.stretch_distribution(g, 1.0, 0.1)
    t = build_graph(uniform_points(Region("torus", 1.0), 2, 0), seed=0)
    with pytest.raises(ParameterError):
        M.stretch_distribution(t, 0.9, 1e-6)


def test_log_linear_fit_exact():
    x = np.arange(1, 6, dtype=float)
    slope, intercept, r2 = M.log_linear_fit(x, np.exp(3 - 0.5 * x))
    assert slope == pytest.approx(-0.5) and intercept == pytest.approx(3) and r2 == pytest.approx(1)


def test_height_tail_basics():
    tail = M.height_tail(2000, 1, 0.5, seed=3)
    assert tail[0] == 1.0
    for k in range(1, 5):
        assert abs(tail[k] - 0.5**k) < 4 * math.sqrt(0.5**k / 2000)
    big = M.height_tail(1000, 100, 0.5, seed=4)
    assert big[0] == 1.0 and np.all(np.diff(big) <= 0)


def test_height_tail_poisson_bound():
    region = Region("square", 10.0)
    trials = 2000
    tail = M.height_tail_poisson(trials, 1.0, region, 0.5, seed=2)
    for k, q in enumerate(tail):
        if q > 0:
            assert q <= 1.0 * region.area * 0.5**k + 3 * math.sqrt(q * (1 - q) / trials)


def test_bounds_formulas():
    assert M.degree_bound_arbitrary(0.5) == 26
    assert M.degree_bound_poisson(0.5) == 14
    assert M.weighted_degree_bound(0.5, 16) == pytest.approx(74)


def test_run_trials_preserves_order():
    assert M.run_trials(lambda x: x * x, range(20), jobs=4) == [x * x for x in range(20)]

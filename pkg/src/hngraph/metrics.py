"""Empirical statistics of hierarchical neighbor graphs and the analytic
bounds they are checked against."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra, shortest_path
from scipy.spatial import cKDTree

from hngraph.core import HnGraph, Params, build_graph, build_radius_bounded, det_level, draw_levels
from hngraph.errors import ParameterError, ThresholdNotFoundError
from hngraph.geometry import Region, pair_distances, poisson_points, uniform_points
from hngraph.rng import derive_seed

ALL_PAIRS_MAX_N = 2000
PAIR_SAMPLE = 10_000


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    n: int
    mean: float
    var: float

    @classmethod
    def of(cls, samples, edges) -> "Histogram":
        x = np.asarray(samples, dtype=float)
        edges = np.asarray(edges, dtype=float)
        counts, _ = np.histogram(x, bins=edges)
        mean = float(x.mean()) if len(x) else math.nan
        var = float(x.var(ddof=1)) if len(x) > 1 else 0.0 if len(x) else math.nan
        return cls(edges, counts, len(x), mean, var)

    @classmethod
    def of_integers(cls, samples) -> "Histogram":
        x = np.asarray(samples, dtype=np.int64)
        hi = int(x.max()) + 1 if len(x) else 1
        return cls.of(x, np.arange(hi + 1) - 0.5)

    @property
    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2

    @property
    def stderr(self) -> float:
        return math.sqrt(self.var / self.n) if self.n > 1 else math.nan

    def rows(self):
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            yield float(lo), float(hi), int(c)


def run_trials(fn, args, jobs: int = 1) -> list:
    """Map ``fn`` over ``args``; results keep the order of ``args``."""
    if jobs <= 1:
        return [fn(a) for a in args]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args))


# -- analytic bounds ---------------------------------------------------------


def degree_bound_arbitrary(p: float) -> float:
    """Expected degree bound on an arbitrary point set."""
    return 1 / p + 6 / (p * (1 - p))


def degree_bound_poisson(p: float) -> float:
    return 7 / p


def weighted_degree_bound(p: float, w: float) -> float:
    """Expected degree bound of a node of weight ``w`` on an arbitrary point set."""
    return 1 / p + (6 / p) * (math.log(w) / math.log(1 / p) + 1 / (1 - p))


def height_tail_bound(total_weight: float, p: float, k: int) -> float:
    return total_weight * p**k


def direct_edge_prob_bound(l: float, lam: float, p: float) -> float:
    """Upper bound on the probability that two Poisson points at distance
    ``l`` are joined directly."""
    if not (l > 0 and lam > 0 and 0 < p < 1):
        raise ParameterError("need l > 0, lambda > 0 and 0 < p < 1")
    x = lam * math.pi * l * l * p
    head = 2 * (1 - p) / (x * x)
    # -expm1(-x) - x e^-x == 1 - e^-x (x + 1), without cancellation at small x
    core = -math.expm1(-x) - x * math.exp(-x)
    return head * (core / math.log(1 / p) + 4 / math.e**2)


# -- graph statistics ----------------------------------------------------------


def degree_stats(graph: HnGraph) -> Histogram:
    return Histogram.of_integers(graph.degrees)


def edge_lengths(graph: HnGraph) -> np.ndarray:
    e = graph.edges
    return pair_distances(graph.xy[e[:, 0]], graph.xy[e[:, 1]], graph.region)


def edge_length_stats(graph: HnGraph, bins: int = 50) -> Histogram:
    lengths = edge_lengths(graph)
    if not len(lengths):
        return Histogram.of(lengths, [0.0, 1.0])
    lo, hi = float(lengths.min()), float(lengths.max())
    if hi == lo:
        edges = [lo - 0.5, lo + 0.5] if lo >= 0.5 else [0.0, 2 * lo or 1.0]
    else:
        edges = np.linspace(lo, hi, bins + 1)
    return Histogram.of(lengths, edges)


def _csgraph(graph: HnGraph, weighted=False):
    n = graph.n
    e = graph.edges
    data = edge_lengths(graph) if weighted else np.ones(len(e))
    return coo_matrix((data, (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()


def component_count(graph: HnGraph) -> int:
    if graph.n == 0:
        return 0
    return int(connected_components(_csgraph(graph), directed=False)[0])


def is_connected(graph: HnGraph) -> bool:
    return component_count(graph) <= 1


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n
        self.sets = n

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.sets -= 1
        return True


def connected_by_union_find(graph: HnGraph) -> bool:
    uf = UnionFind(graph.n)
    for a, b, _ in graph.edges.tolist():
        uf.union(a, b)
    return uf.sets <= 1


# -- lambda_min ------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdResult:
    r: float
    lambda_min: float
    increments_checked: int
    step: float
    trials: int

    @property
    def scaled(self) -> float:
        """``lambda_min * r**2``."""
        return self.lambda_min * self.r * self.r


def _all_connected(r, lam, j, p, region, trials, seed):
    for t in range(trials):
        pts = poisson_points(region, lam, derive_seed(seed, "lambda", j, t))
        if len(pts) == 0:
            return False
        g = build_radius_bounded(pts, None, Params(p), r, seed=derive_seed(seed, "levels", j, t))
        if not is_connected(g):
            return False
    return True


def find_lambda_min(
    r: float,
    p: float = 0.5,
    region: Region = Region("square", 10.0),
    step: float = 0.1,
    trials: int = 20,
    seed: int = 0,
    confirm: int = 10,
    lam_cap: float | None = None,
) -> ThresholdResult:
    """Sweep the density upward in ``step`` increments.

    A density is a candidate once all ``trials`` radius-bounded graphs are
    connected (an empty point set does not count); it is accepted once the
    next ``confirm`` increments are all connected as well.
    """
    if not (r > 0 and step > 0 and trials >= 1):
        raise ParameterError("need r > 0, step > 0 and trials >= 1")
    lam_cap = 1000.0 / (r * r) if lam_cap is None else lam_cap
    candidate = None
    j = 1
    while j * step <= lam_cap:
        ok = _all_connected(r, j * step, j, p, region, trials, seed)
        if ok:
            if candidate is None:
                candidate = j
            elif j - candidate >= confirm:
                return ThresholdResult(r, candidate * step, confirm, step, trials)
        else:
            candidate = None
        j += 1
    raise ThresholdNotFoundError(f"no confirmed threshold below lambda={lam_cap} for r={r}")


# -- hops and stretch ---------------------------------------------------------------


def _sample_pairs(n, rng, sample=PAIR_SAMPLE):
    if n <= ALL_PAIRS_MAX_N:
        a, b = np.triu_indices(n, k=1)
        return a, b
    a = rng.integers(0, n, size=sample)
    b = rng.integers(0, n - 1, size=sample)
    b = b + (b >= a)
    return a, b


@dataclass(frozen=True)
class HopStats:
    hops: Histogram
    distance_edges: np.ndarray
    bucket_pairs: np.ndarray
    bucket_mean_hops: np.ndarray
    unreachable: int


def hop_stats(graph: HnGraph, seed: int = 0, bucket_width: float | None = None) -> HopStats:
    """BFS hop counts between node pairs, bucketed by Euclidean distance."""
    n = graph.n
    rng = np.random.default_rng(seed)
    a, b = _sample_pairs(n, rng)
    if n == 0 or len(a) == 0:
        empty = np.zeros(0)
        return HopStats(Histogram.of([], [0, 1]), np.array([0.0, 1.0]), empty, empty, 0)
    sources, inverse = np.unique(a, return_inverse=True)
    hop = shortest_path(_csgraph(graph), unweighted=True, directed=False, indices=sources)
    h = hop[inverse, b]
    d = pair_distances(graph.xy[a], graph.xy[b], graph.region)
    reach = np.isfinite(h)
    h, d = h[reach], d[reach]
    width = bucket_width or graph.region.diameter / 20
    edges = np.arange(0.0, d.max() + width, width) if len(d) else np.array([0.0, width])
    idx = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, len(edges) - 2)
    pairs = np.bincount(idx, minlength=len(edges) - 1)
    sums = np.bincount(idx, weights=h, minlength=len(edges) - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(pairs > 0, sums / np.maximum(pairs, 1), np.nan)
    return HopStats(Histogram.of_integers(h.astype(np.int64)), edges, pairs, means, int((~reach).sum()))


def stretch_samples(graph: HnGraph, distance: float, tolerance: float, seed: int = 0) -> np.ndarray:
    """Distance stretch ``d_G(u, v) / d(u, v)`` for pairs with ``|d(u, v) - distance| <= tolerance``."""
    lo, hi = distance - tolerance, distance + tolerance
    if graph.n < 2:
        return np.zeros(0)
    tree = cKDTree(graph.xy, boxsize=graph.region.side if graph.region.periodic else None)
    pairs = tree.query_pairs(hi * (1 + 1e-9), output_type="ndarray")
    if len(pairs):
        d = pair_distances(graph.xy[pairs[:, 0]], graph.xy[pairs[:, 1]], graph.region)
        keep = (d >= lo) & (d <= hi)
        pairs, d = pairs[keep], d[keep]
    if len(pairs) == 0:
        return np.zeros(0)
    if graph.n > ALL_PAIRS_MAX_N and len(pairs) > PAIR_SAMPLE:
        pick = np.sort(np.random.default_rng(seed).choice(len(pairs), PAIR_SAMPLE, replace=False))
        pairs, d = pairs[pick], d[pick]
    sources, inverse = np.unique(pairs[:, 0], return_inverse=True)
    dg = dijkstra(_csgraph(graph, weighted=True), directed=False, indices=sources)
    return dg[inverse, pairs[:, 1]] / d


def stretch_distribution(
    graph: HnGraph, distance: float, tolerance: float, seed: int = 0, bin_width: float = 0.25
) -> Histogram:
    if not graph.region.periodic:
        raise ParameterError("stretch experiments run on a torus")
    s = stretch_samples(graph, distance, tolerance, seed)
    if not len(s):
        raise ParameterError(f"no pairs with distance in [{distance - tolerance}, {distance + tolerance}]")
    s = s[np.isfinite(s)]
    top = max(float(s.max()), 1.0)
    edges = np.arange(1.0, top + bin_width, bin_width)
    if len(edges) < 2:
        edges = np.array([1.0, 1.0 + bin_width])
    edges[-1] = max(edges[-1], top)
    return Histogram.of(s, edges)


def log_linear_fit(centers, counts):
    """Least squares of ``log(count)`` on bucket centre over non-empty buckets.

    Returns ``(slope, intercept, r_squared)``.
    """
    c = np.asarray(counts, dtype=float)
    x = np.asarray(centers, dtype=float)[c > 0]
    y = np.log(c[c > 0])
    if len(x) < 2:
        return math.nan, math.nan, math.nan
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


# -- height -------------------------------------------------------------------------


def height_tail(trials: int, n: int, p: float = 0.5, seed: int = 0) -> np.ndarray:
    """Empirical ``P(height >= k)`` for ``k = 0..max`` over unit-weight sets of ``n`` nodes.

    Heights depend on levels only, so node positions are never drawn.
    """
    if n < 1:
        raise ParameterError("n must be at least 1")
    rng = np.random.default_rng(seed)
    inc = rng.geometric(1 - p, size=(trials, n)) - 1
    heights = inc.max(axis=1)
    counts = np.bincount(heights)
    return counts[::-1].cumsum()[::-1] / trials


def height_tail_poisson(trials: int, lam: float, region: Region, p: float = 0.5, seed: int = 0) -> np.ndarray:
    """Same as :func:`height_tail` with a Poisson number of nodes; an empty set has no height and counts as below every k >= 1."""
    rng = np.random.default_rng(seed)
    counts = rng.poisson(lam * region.area, size=trials)
    heights = np.full(trials, -1)
    for t, m in enumerate(counts.tolist()):
        if m:
            heights[t] = int((rng.geometric(1 - p, size=m) - 1).max())
    hist = np.bincount(heights[heights >= 0], minlength=1)
    tail = hist[::-1].cumsum()[::-1] / trials
    return tail


def weighted_heavy_degree(lam: float, region: Region, weight: float, p: float, seed: int) -> int:
    """Degree of one node of ``weight`` dropped among Poisson unit-weight nodes."""
    pts = poisson_points(region, lam, derive_seed(seed, "points"))
    rng = np.random.default_rng(derive_seed(seed, "heavy"))
    xy = np.vstack([pts.xy, np.minimum(rng.random((1, 2)) * region.side, np.nextafter(region.side, 0))])
    from hngraph.geometry import PointSet

    allpts = PointSet(xy, region, seed)
    w = np.ones(len(xy))
    w[-1] = weight
    g = build_graph(allpts, w, Params(p), seed=derive_seed(seed, "levels"))
    return int(g.degrees[-1])


def mean_degree(lam: float, region: Region, p: float, seed: int) -> tuple[float, int]:
    """Mean degree and node count of one Poisson instance."""
    pts = poisson_points(region, lam, derive_seed(seed, "points"))
    g = build_graph(pts, None, Params(p), seed=derive_seed(seed, "levels"))
    return (float(g.degrees.mean()) if g.n else 0.0), g.n


def direct_edge_frequency(lam: float, region: Region, p: float, l: float, tol: float, seed: int):
    """``(pairs, joined)`` among node pairs with distance in ``[l - tol, l + tol]``."""
    pts = poisson_points(region, lam, derive_seed(seed, "points"))
    g = build_graph(pts, None, Params(p), seed=derive_seed(seed, "levels"))
    if g.n < 2:
        return 0, 0
    tree = cKDTree(g.xy, boxsize=region.side if region.periodic else None)
    pairs = tree.query_pairs((l + tol) * (1 + 1e-9), output_type="ndarray")
    if not len(pairs):
        return 0, 0
    d = pair_distances(g.xy[pairs[:, 0]], g.xy[pairs[:, 1]], region)
    pairs = pairs[(d >= l - tol) & (d <= l + tol)]
    a = np.minimum(pairs[:, 0], pairs[:, 1])
    b = np.maximum(pairs[:, 0], pairs[:, 1])
    keys = g.edges[:, 0] * g.n + g.edges[:, 1]
    joined = np.isin(a * g.n + b, keys)
    return len(pairs), int(joined.sum())


__all__ = [
    "Histogram",
    "HopStats",
    "ThresholdResult",
    "UnionFind",
    "component_count",
    "connected_by_union_find",
    "degree_bound_arbitrary",
    "degree_bound_poisson",
    "degree_stats",
    "det_level",
    "direct_edge_frequency",
    "direct_edge_prob_bound",
    "draw_levels",
    "edge_length_stats",
    "find_lambda_min",
    "height_tail",
    "height_tail_bound",
    "height_tail_poisson",
    "hop_stats",
    "is_connected",
    "log_linear_fit",
    "mean_degree",
    "run_trials",
    "stretch_distribution",
    "stretch_samples",
    "uniform_points",
    "weighted_degree_bound",
    "weighted_heavy_degree",
]

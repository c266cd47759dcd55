"""Level assignment and construction of hierarchical neighbor graphs.

Every node ``u`` receives a level: a deterministic part ``floor(log_{1/p} w(u))``
plus a geometric number of coin-flip promotions.  Each node then grows a ball
until it meets the nearest node of strictly higher level (its parent); it
links to that node (to all of them on an exact tie) and to every node of its
own level inside the closed ball.  Nodes on the top occupied level have no
parent, so their ball is unbounded and they form a clique.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import chain

import numpy as np
from scipy.spatial import cKDTree

from hngraph.errors import LevelOverflowError, ParameterError
from hngraph.geometry import PointSet, pair_distances

CAP_MARGIN = 64
# relative slack used when turning kd-tree answers into exact candidates
_SLACK = 1e-9


@dataclass(frozen=True)
class Params:
    p: float = 0.5
    max_level_cap: int | None = None

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ParameterError(f"p must lie strictly between 0 and 1, got {self.p}")
        if self.max_level_cap is not None and self.max_level_cap < 0:
            raise ParameterError("max_level_cap must be non-negative")

    def cap_for(self, max_det_level: int) -> int:
        if self.max_level_cap is None:
            return max_det_level + CAP_MARGIN
        if self.max_level_cap < max_det_level:
            raise ParameterError(
                f"max_level_cap {self.max_level_cap} is below the deterministic level {max_det_level}"
            )
        return self.max_level_cap


def det_level(weight: float, p: float) -> int:
    """``floor(log_{1/p} weight)``, corrected against float error in the log."""
    if not (weight >= 1.0) or not math.isfinite(weight):
        raise ParameterError(f"weight must be a finite number >= 1, got {weight}")
    base = 1.0 / p
    k = int(math.floor(math.log(weight) / math.log(base)))
    while base ** (k + 1) <= weight:
        k += 1
    while k > 0 and base**k > weight:
        k -= 1
    return k


def _draw_increments(p, size, rng):
    # numpy's geometric counts trials up to the first success (support 1, 2, ...)
    return np.asarray(rng.geometric(1.0 - p, size=size), dtype=np.int64) - 1


def assign_level(weight: float, params: Params, rng: np.random.Generator) -> int:
    det = det_level(weight, params.p)
    level = det + int(_draw_increments(params.p, None, rng))
    if level > params.cap_for(det):
        raise LevelOverflowError(f"level {level} exceeds cap {params.cap_for(det)}")
    return level


@dataclass(frozen=True, eq=False)
class LevelAssignment:
    det_levels: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        det = np.asarray(self.det_levels, dtype=np.int64).copy()
        inc = np.asarray(self.increments, dtype=np.int64).copy()
        if det.shape != inc.shape:
            raise ParameterError("det_levels and increments differ in shape")
        if np.any(det < 0) or np.any(inc < 0):
            raise ParameterError("levels must be non-negative")
        det.setflags(write=False)
        inc.setflags(write=False)
        object.__setattr__(self, "det_levels", det)
        object.__setattr__(self, "increments", inc)

    @cached_property
    def levels(self) -> np.ndarray:
        lev = self.det_levels + self.increments
        lev.setflags(write=False)
        return lev

    def __len__(self):
        return len(self.det_levels)


def draw_levels(weights, params: Params, rng: np.random.Generator) -> LevelAssignment:
    weights = np.asarray(weights, dtype=float)
    det = np.array([det_level(w, params.p) for w in weights], dtype=np.int64)
    inc = _draw_increments(params.p, len(weights), rng)
    if len(det):
        cap = params.cap_for(int(det.max()))
        if np.any(det + inc > cap):
            raise LevelOverflowError(f"a drawn level exceeds the cap {cap}")
    return LevelAssignment(det, inc)


@dataclass(frozen=True, eq=False)
class HnGraph:
    """An immutable hierarchical neighbor graph.

    Nodes are addressed by index ``0..n-1``; ``points.ids`` maps an index to
    its external node id (the two coincide for freshly built graphs).
    ``edges`` is an ``(m, 3)`` array of ``(u, v, creation_level)`` with
    ``u < v``, sorted.  ``parent[u]`` is ``-1`` for parentless nodes.
    """

    points: PointSet
    params: Params
    weights: np.ndarray
    levels: LevelAssignment
    parent: np.ndarray
    edges: np.ndarray
    radius_limit: np.ndarray | None = None
    seed: int | None = None

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def region(self):
        return self.points.region

    @property
    def xy(self) -> np.ndarray:
        return self.points.xy

    @property
    def ids(self) -> np.ndarray:
        return self.points.ids

    @property
    def lev(self) -> np.ndarray:
        return self.levels.levels

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adj(self) -> list[list[int]]:
        """Sorted neighbor lists."""
        n = self.n
        if not len(self.edges):
            return [[] for _ in range(n)]
        u, v = self.edges[:, 0], self.edges[:, 1]
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        bounds = np.searchsorted(src, np.arange(n + 1))
        dst = dst.tolist()
        return [dst[bounds[i] : bounds[i + 1]] for i in range(n)]

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        if len(self.edges):
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    @cached_property
    def children(self) -> list[list[int]]:
        kids = [[] for _ in range(self.n)]
        for u, par in enumerate(self.parent.tolist()):
            if par >= 0:
                kids[par].append(u)
        return kids

    def edge_length(self, u: int, v: int) -> float:
        return float(pair_distances(self.xy[u], self.xy[v], self.region))

    def edge_set(self) -> set[tuple[int, int, int]]:
        """Edges as ``(id_u, id_v, level)`` with ``id_u < id_v``."""
        ids = self.ids
        return {(int(ids[a]), int(ids[b]), int(k)) for a, b, k in self.edges.tolist()}

    def fingerprint(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for arr in (self.points.ids, self.xy, self.lev, self.parent, self.edges):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, HnGraph):
            return NotImplemented
        same_limits = (self.radius_limit is None) == (other.radius_limit is None)
        if same_limits and self.radius_limit is not None:
            same_limits = np.array_equal(self.radius_limit, other.radius_limit)
        return (
            same_limits
            and self.points == other.points
            and self.params == other.params
            and self.seed == other.seed
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.levels.det_levels, other.levels.det_levels)
            and np.array_equal(self.levels.increments, other.levels.increments)
            and np.array_equal(self.parent, other.parent)
            and np.array_equal(self.edges, other.edges)
        )

    __hash__ = None


def _flatten(lists, counts):
    return np.fromiter(chain.from_iterable(lists), dtype=np.int64, count=int(counts.sum()))


def _nearest_higher(xy, region, members, higher, index):
    """Parent search for ``members`` among ``higher``.

    Returns the designated parent (lowest index on a tie), the exact parent
    distance, and directed (src, dst) pairs to every tied nearest node.
    """
    pts = xy[members]
    nh = len(higher)
    if index == "brute" or nh == 1:
        ambiguous = np.ones(len(members), dtype=bool)
        par = np.empty(len(members), dtype=np.int64)
        dmin = np.empty(len(members))
    else:
        tree = cKDTree(xy[higher], boxsize=region.side if region.periodic else None)
        _, ii = tree.query(pts, k=2)
        first, second = higher[ii[:, 0]], higher[ii[:, 1]]
        dmin = pair_distances(pts, xy[first], region)
        d2 = pair_distances(pts, xy[second], region)
        par = first
        ambiguous = d2 <= dmin * (1.0 + _SLACK)
    src = [members[~ambiguous]]
    dst = [par[~ambiguous]]
    for k in np.flatnonzero(ambiguous):
        d = pair_distances(pts[k], xy[higher], region)
        best = d.min()
        ties = higher[d == best]
        par[k] = ties.min()
        dmin[k] = best
        src.append(np.full(len(ties), members[k], dtype=np.int64))
        dst.append(ties)
    return par, dmin, np.concatenate(src), np.concatenate(dst)


def _same_level_pairs(xy, region, members, reach, index):
    """Directed pairs (u, v), u != v, both in ``members``, d(u, v) <= reach[u]."""
    pts = xy[members]
    m = len(members)
    if index == "brute":
        src, dst = [], []
        for k in range(m):
            d = pair_distances(pts[k], pts, region)
            hit = np.flatnonzero(d <= reach[k])
            hit = hit[hit != k]
            src.append(np.full(len(hit), members[k], dtype=np.int64))
            dst.append(members[hit])
        return np.concatenate(src), np.concatenate(dst)
    tree = cKDTree(pts, boxsize=region.side if region.periodic else None)
    lists = tree.query_ball_point(pts, r=reach * (1.0 + _SLACK), return_sorted=False)
    counts = np.fromiter(map(len, lists), dtype=np.int64, count=m)
    cand = _flatten(lists, counts)
    owner = np.repeat(np.arange(m), counts)
    d = pair_distances(pts[owner], pts[cand], region)
    keep = (d <= reach[owner]) & (cand != owner)
    return members[owner[keep]], members[cand[keep]]


def connect(xy: np.ndarray, region, lev: np.ndarray, index: str = "kdtree"):
    """Run the ball-growing rule for fixed levels.

    Returns ``(parent, reach, src, dst)``: designated parents, each node's
    connection radius (``inf`` on the top level), and every directed
    connection ``src -> dst`` the rule initiates.
    """
    if index not in ("kdtree", "brute"):
        raise ParameterError(f"unknown index {index!r}")
    n = len(xy)
    parent = np.full(n, -1, dtype=np.int64)
    reach = np.full(n, np.inf)
    srcs = [np.empty(0, dtype=np.int64)]
    dsts = [np.empty(0, dtype=np.int64)]
    if n == 0:
        return parent, reach, srcs[0], dsts[0]
    top = int(lev.max())
    for level in np.unique(lev).tolist():
        members = np.flatnonzero(lev == level)
        if level < top:
            higher = np.flatnonzero(lev > level)
            par, dmin, s, d = _nearest_higher(xy, region, members, higher, index)
            parent[members] = par
            reach[members] = dmin
            srcs.append(s)
            dsts.append(d)
            if len(members) > 1:
                s, d = _same_level_pairs(xy, region, members, dmin, index)
                srcs.append(s)
                dsts.append(d)
        elif len(members) > 1:
            a, b = np.meshgrid(members, members, indexing="ij")
            off = a != b
            srcs.append(a[off])
            dsts.append(b[off])
    return parent, reach, np.concatenate(srcs), np.concatenate(dsts)


def _edges_from_directed(n, lev, src, dst):
    if not len(src):
        return np.empty((0, 3), dtype=np.int64)
    a = np.minimum(src, dst)
    b = np.maximum(src, dst)
    keys, first = np.unique(a * n + b, return_index=True)
    return np.column_stack([keys // n, keys % n, lev[src[first]]]).astype(np.int64)


def _check_radius(radius_limit, n):
    r = np.broadcast_to(np.asarray(radius_limit, dtype=float), (n,)).copy()
    if np.any(~(r > 0)):
        raise ParameterError("transmission radii must be positive")
    r.setflags(write=False)
    return r


def build_from_levels(
    points: PointSet,
    levels: LevelAssignment,
    params: Params = Params(),
    weights=None,
    radius_limit=None,
    seed: int | None = None,
    index: str = "kdtree",
) -> HnGraph:
    """Build the graph for an explicit level assignment."""
    n = len(points)
    if len(levels) != n:
        raise ParameterError("level assignment does not match the point set")
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float).copy()
    weights.setflags(write=False)
    lev = levels.levels
    parent, reach, src, dst = connect(points.xy, points.region, lev, index)
    if radius_limit is not None:
        radius_limit = _check_radius(radius_limit, n)
        d = pair_distances(points.xy[src], points.xy[dst], points.region)
        keep = d <= radius_limit[src]
        src, dst = src[keep], dst[keep]
        parent[reach > radius_limit] = -1
    parent.setflags(write=False)
    edges = _edges_from_directed(n, lev, src, dst)
    edges.setflags(write=False)
    return HnGraph(points, params, weights, levels, parent, edges, radius_limit, seed)


def _weights_or_ones(points, weights):
    if weights is None:
        return np.ones(len(points))
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(points),):
        raise ParameterError("weights must be defined for every point")
    return w


def build_graph(points: PointSet, weights=None, params: Params = Params(), seed: int = 0, index="kdtree") -> HnGraph:
    """Draw levels from ``seed`` and build the unbounded graph."""
    w = _weights_or_ones(points, weights)
    levels = draw_levels(w, params, np.random.default_rng(seed))
    return build_from_levels(points, levels, params, w, seed=seed, index=index)


def build_radius_bounded(
    points: PointSet, weights, params: Params, r, seed: int = 0, index="kdtree"
) -> HnGraph:
    """Same levels as :func:`build_graph` with ``seed``; connections longer than ``r(u)`` are suppressed."""
    w = _weights_or_ones(points, weights)
    r = _check_radius(r, len(points))
    levels = draw_levels(w, params, np.random.default_rng(seed))
    return build_from_levels(points, levels, params, w, radius_limit=r, seed=seed, index=index)


def level_sets(graph: HnGraph) -> list[frozenset]:
    """``S_0 ⊇ S_1 ⊇ ... ⊇ S_height`` as sets of node ids."""
    if graph.n == 0:
        return []
    lev, ids = graph.lev, graph.ids
    return [frozenset(ids[lev >= i].tolist()) for i in range(int(lev.max()) + 1)]


def height(graph: HnGraph) -> int:
    if graph.n == 0:
        raise ParameterError("height of an empty graph is undefined")
    return int(graph.lev.max())

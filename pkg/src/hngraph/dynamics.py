"""Incremental repair of a hierarchical neighbor graph.

:class:`DynamicGraph` keeps, for every node, the set of connections it
initiated (``out``) and the reverse index (``inn``).  An undirected edge
exists while at least one endpoint initiates it, so every repair is a local
rewrite of a few ``out`` sets.  Each node keeps its probabilistic promotion
count, so a weight change only moves the deterministic part of its level.

Repairs are always applied to the unbounded structure; a radius-bounded
view is obtained by filtering at :meth:`DynamicGraph.snapshot` time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hngraph.core import (
    HnGraph,
    LevelAssignment,
    Params,
    _draw_increments,
    build_from_levels,
    connect,
    det_level,
)
from hngraph.errors import LevelOverflowError, NotFoundError, ParameterError
from hngraph.geometry import PointSet, Region

INF = math.inf


@dataclass(frozen=True)
class GraphDelta:
    added_edges: tuple = ()
    removed_edges: tuple = ()
    reparented: tuple = ()
    affected: frozenset = field(default_factory=frozenset)

    @property
    def empty(self) -> bool:
        return not (self.added_edges or self.removed_edges or self.reparented)

    def apply(self, edges: set) -> set:
        """Apply to an edge set of ``(id_u, id_v, level)`` triples."""
        return (set(edges) - set(self.removed_edges)) | set(self.added_edges)


class DynamicGraph:
    def __init__(self, region: Region, params: Params = Params(), bounded: bool = False):
        self.region = region
        self.params = params
        self.bounded = bounded
        self.pos = {}
        self.weight = {}
        self.det = {}
        self.inc = {}
        self.level = {}
        self.parent = {}
        self.reach = {}
        self.out = {}
        self.inn = {}
        self.radius = {}
        self.next_id = 0
        self._touched = None

    @classmethod
    def from_graph(cls, graph: HnGraph) -> "DynamicGraph":
        dg = cls(graph.region, graph.params, bounded=graph.radius_limit is not None)
        ids = graph.ids.tolist()
        lev = graph.lev
        parent, reach, src, dst = connect(graph.xy, graph.region, lev)
        for i, nid in enumerate(ids):
            dg.pos[nid] = (float(graph.xy[i, 0]), float(graph.xy[i, 1]))
            dg.weight[nid] = float(graph.weights[i])
            dg.det[nid] = int(graph.levels.det_levels[i])
            dg.inc[nid] = int(graph.levels.increments[i])
            dg.level[nid] = int(lev[i])
            dg.parent[nid] = ids[parent[i]] if parent[i] >= 0 else None
            dg.reach[nid] = float(reach[i])
            dg.out[nid] = set()
            dg.inn[nid] = set()
            if dg.bounded:
                dg.radius[nid] = float(graph.radius_limit[i])
        for s, d in zip(src.tolist(), dst.tolist()):
            dg.out[ids[s]].add(ids[d])
            dg.inn[ids[d]].add(ids[s])
        dg.next_id = max(ids) + 1 if ids else 0
        return dg

    def __len__(self):
        return len(self.pos)

    def __contains__(self, nid):
        return nid in self.pos

    # -- geometry -------------------------------------------------------

    def _dist(self, a, b) -> float:
        (ax, ay), (bx, by) = self.pos[a], self.pos[b]
        side = self.region.side
        dx = abs(ax - bx)
        dy = abs(ay - by)
        if self.region.periodic:
            dx = min(dx, side - dx)
            dy = min(dy, side - dy)
        return math.sqrt(dx * dx + dy * dy)

    # -- bookkeeping ------------------------------------------------------

    def _incident(self, v) -> dict:
        found = {}
        for x in self.out[v]:
            found[(min(v, x), max(v, x))] = self.level[v]
        for y in self.inn[v]:
            found.setdefault((min(v, y), max(v, y)), self.level[y])
        return found

    def _touch(self, v):
        t = self._touched
        if t is not None and v not in t["nodes"]:
            t["nodes"].add(v)
            t["parents"][v] = self.parent.get(v)
            if v in self.out:
                # first capture wins: it predates every change to the edge
                for key, k in self._incident(v).items():
                    t["before"].setdefault(key, k)

    def _set_out(self, v, new_out: set):
        old = self.out[v]
        self._touch(v)
        for x in old ^ new_out:
            self._touch(x)
        for x in old - new_out:
            self.inn[x].discard(v)
        for x in new_out - old:
            self.inn[x].add(v)
        self.out[v] = new_out

    def _begin(self):
        self._touched = {"nodes": set(), "parents": {}, "before": {}}

    def _finish(self) -> GraphDelta:
        t, self._touched = self._touched, None
        after = {}
        for v in t["nodes"]:
            if v in self.out:
                after.update(self._incident(v))
        before = {(a, b, k) for (a, b), k in t["before"].items()}
        after = {(a, b, k) for (a, b), k in after.items()}
        reparented = tuple(
            (v, old, self.parent.get(v))
            for v, old in sorted(t["parents"].items())
            if old != self.parent.get(v)
        )
        added, removed = after - before, before - after
        affected = set(t["nodes"])
        affected.update(x for a, b, _ in added | removed for x in (a, b))
        affected.update(x for _, old, new in reparented for x in (old, new) if x is not None)
        return GraphDelta(
            added_edges=tuple(sorted(added)),
            removed_edges=tuple(sorted(removed)),
            reparented=reparented,
            affected=frozenset(affected),
        )

    # -- the ball-growing rule, locally --------------------------------------

    def _research(self, v):
        """Re-run the parent search and ball edges of ``v`` from scratch."""
        self._touch(v)
        lv = self.level[v]
        best = INF
        ties = []
        for w, lw in self.level.items():
            if lw > lv:
                d = self._dist(v, w)
                if d < best:
                    best, ties = d, [w]
                elif d == best:
                    ties.append(w)
        same = (w for w, lw in self.level.items() if lw == lv and w != v)
        if ties:
            new_out = set(ties) | {w for w in same if self._dist(v, w) <= best}
            self.parent[v] = min(ties)
        else:
            new_out = set(same)
            self.parent[v] = None
        self.reach[v] = best
        self._set_out(v, new_out)

    def _promote_effects(self, u):
        """Nodes reacting to ``u`` now sitting at level ``level[u]``."""
        lu = self.level[u]
        for v in list(self.level):
            if v == u:
                continue
            lv = self.level[v]
            if lv < lu:
                d = self._dist(v, u)
                if d < self.reach[v]:
                    keep = {w for w in self.out[v] if w != u and self.level[w] == lv and self._dist(v, w) <= d}
                    self._touch(v)
                    self.parent[v] = u
                    self.reach[v] = d
                    self._set_out(v, keep | {u})
                elif d == self.reach[v]:
                    # u may already be linked as a former same-level neighbor
                    self._touch(v)
                    self.parent[v] = u if self.parent[v] is None else min(self.parent[v], u)
                    self._set_out(v, self.out[v] | {u})
            elif lv == lu and u not in self.out[v] and self._dist(v, u) <= self.reach[v]:
                self._set_out(v, self.out[v] | {u})

    def _check_cap(self, det, inc):
        cap = self.params.cap_for(det)
        if det + inc > cap:
            raise LevelOverflowError(f"level {det + inc} exceeds cap {cap}")

    # -- public repairs -------------------------------------------------------

    def add_node(self, position, weight: float = 1.0, rng=None, increment=None, radius=None) -> GraphDelta:
        """Insert a node; returns the delta.  The new id is ``next_id``."""
        x, y = float(position[0]), float(position[1])
        if not self.region.contains(x, y):
            raise ParameterError(f"position {position} outside region {self.region}")
        det = det_level(weight, self.params.p)
        if increment is None:
            rng = rng if rng is not None else np.random.default_rng()
            increment = int(_draw_increments(self.params.p, None, rng))
        self._check_cap(det, increment)
        if self.bounded:
            if radius is None or not radius > 0:
                raise ParameterError("a positive radius is required for radius-bounded graphs")
        u = self.next_id
        self.next_id += 1
        self._begin()
        self.pos[u] = (x, y)
        self.weight[u] = float(weight)
        self.det[u] = det
        self.inc[u] = int(increment)
        self.level[u] = det + int(increment)
        self.parent[u] = None
        self.reach[u] = INF
        self.out[u] = set()
        self.inn[u] = set()
        if self.bounded:
            self.radius[u] = float(radius)
        self._touch(u)
        self._promote_effects(u)
        self._research(u)
        return self._finish()

    def remove_node(self, u) -> GraphDelta:
        if u not in self.pos:
            raise NotFoundError(u)
        self._begin()
        self._touch(u)
        lu = self.level[u]
        orphans = []
        for v in sorted(self.inn[u]):
            if self.level[v] < lu:
                orphans.append(v)
            self._set_out(v, self.out[v] - {u})
        self._set_out(u, set())
        for table in (self.pos, self.weight, self.det, self.inc, self.level, self.parent,
                      self.reach, self.out, self.inn, self.radius):
            table.pop(u, None)
        for v in orphans:
            self._research(v)
        return self._finish()

    def update_weight(self, u, new_weight: float) -> GraphDelta:
        if u not in self.pos:
            raise NotFoundError(u)
        det = det_level(new_weight, self.params.p)
        self._check_cap(det, self.inc[u])
        old, new = self.level[u], det + self.inc[u]
        self.weight[u] = float(new_weight)
        self._begin()
        if new != old:
            self._touch(u)
            for v in self.inn[u]:
                self._touch(v)
            self.det[u] = det
            self.level[u] = new
            if new < old:
                for v in sorted(self.inn[u]):
                    lv = self.level[v]
                    if new <= lv < old:
                        self._research(v)
                    elif lv == old:
                        self._set_out(v, self.out[v] - {u})
            else:
                self._promote_effects(u)
            self._research(u)
        return self._finish()

    # -- views ------------------------------------------------------------------

    def edge_set(self, bounded: bool | None = None) -> set:
        bounded = self.bounded if bounded is None else bounded
        edges = {}
        for v, outs in self.out.items():
            for x in outs:
                if bounded and self._dist(v, x) > self.radius[v]:
                    continue
                key = (min(v, x), max(v, x))
                edges[key] = self.level[v]
        return {(a, b, k) for (a, b), k in edges.items()}

    def _arrays(self):
        ids = sorted(self.pos)
        xy = np.array([self.pos[i] for i in ids], dtype=float).reshape(-1, 2)
        points = PointSet(xy, self.region, ids=ids)
        levels = LevelAssignment([self.det[i] for i in ids], [self.inc[i] for i in ids])
        weights = np.array([self.weight[i] for i in ids], dtype=float)
        radius = np.array([self.radius[i] for i in ids], dtype=float) if self.bounded else None
        return ids, points, levels, weights, radius

    def snapshot(self) -> HnGraph:
        ids, points, levels, weights, radius = self._arrays()
        index = {nid: i for i, nid in enumerate(ids)}
        parent = np.full(len(ids), -1, dtype=np.int64)
        for nid in ids:
            par = self.parent[nid]
            if par is not None and not (self.bounded and self.reach[nid] > self.radius[nid]):
                parent[index[nid]] = index[par]
        rows = sorted((index[a], index[b], k) for a, b, k in self.edge_set())
        edges = np.array(rows, dtype=np.int64).reshape(-1, 3)
        for arr in (parent, edges, weights) + ((radius,) if radius is not None else ()):
            arr.setflags(write=False)
        return HnGraph(points, self.params, weights, levels, parent, edges, radius)

    def rebuild(self) -> HnGraph:
        """From-scratch construction on the current nodes with their stored levels."""
        _, points, levels, weights, radius = self._arrays()
        return build_from_levels(points, levels, self.params, weights, radius_limit=radius)


def add_node(graph: HnGraph, position, weight=1.0, rng=None, increment=None, radius=None):
    dg = DynamicGraph.from_graph(graph)
    delta = dg.add_node(position, weight, rng=rng, increment=increment, radius=radius)
    return dg.snapshot(), delta


def remove_node(graph: HnGraph, node_id):
    dg = DynamicGraph.from_graph(graph)
    delta = dg.remove_node(node_id)
    return dg.snapshot(), delta


def update_weight(graph: HnGraph, node_id, new_weight):
    dg = DynamicGraph.from_graph(graph)
    delta = dg.update_weight(node_id, new_weight)
    return dg.snapshot(), delta


def parse_events(lines):
    """Parse ``ADD x y w [r]`` / ``REMOVE id`` / ``WEIGHT id w`` lines (``#`` comments)."""
    events = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        op = tok[0].upper()
        try:
            if op == "ADD" and len(tok) in (4, 5):
                events.append(("ADD", float(tok[1]), float(tok[2]), float(tok[3]),
                               float(tok[4]) if len(tok) == 5 else None))
            elif op == "REMOVE" and len(tok) == 2:
                events.append(("REMOVE", int(tok[1])))
            elif op == "WEIGHT" and len(tok) == 3:
                events.append(("WEIGHT", int(tok[1]), float(tok[2])))
            else:
                raise ValueError
        except ValueError:
            raise ParameterError(f"line {lineno}: bad event {line!r}") from None
    return events


def replay(dg: DynamicGraph, events, rng):
    """Apply parsed events in order, yielding ``(event, delta)``."""
    for ev in events:
        if ev[0] == "ADD":
            delta = dg.add_node((ev[1], ev[2]), ev[3], rng=rng, radius=ev[4])
        elif ev[0] == "REMOVE":
            delta = dg.remove_node(ev[1])
        else:
            delta = dg.update_weight(ev[1], ev[2])
        yield ev, delta


_FUZZ_WEIGHTS = (1.0, 1.0, 2.0, 4.0, 8.0, 30.0)
_FUZZ_NEW_WEIGHTS = (1.0, 2.0, 3.0, 4.0, 8.0, 16.0, 64.0)


def random_event(dg: DynamicGraph, rng: np.random.Generator):
    """One mixed event against the current node set: 40% add, 30% remove, 30% weight change."""
    r = rng.random()
    if r < 0.4 or len(dg) == 0:
        side = dg.region.side
        x, y = np.minimum(rng.random(2) * side, np.nextafter(side, 0.0)).tolist()
        return ("ADD", x, y, float(rng.choice(_FUZZ_WEIGHTS)), None)
    node = int(rng.choice(sorted(dg.pos)))
    if r < 0.7:
        return ("REMOVE", node)
    return ("WEIGHT", node, float(rng.choice(_FUZZ_NEW_WEIGHTS)))


def check_against_rebuild(dg: DynamicGraph) -> bool:
    snap, rb = dg.snapshot(), dg.rebuild()
    return snap.edge_set() == rb.edge_set() and np.array_equal(snap.parent, rb.parent)

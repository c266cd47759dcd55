"""Ancestry queries, proactive hierarchical distance-vector routing, and
reactive hierarchical flooding.

Both protocols work on *routing tiers*: at level ``i`` a tier is a connected
group of level-``i`` nodes joined by same-level edges; a node whose level
exceeds ``i`` forms a tier of its own at ``i``.  Information flows up through
parent links, one level at a time.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from hngraph.core import HnGraph
from hngraph.errors import ParameterError, UnreachableError


@dataclass(frozen=True)
class RouteResult:
    path: tuple
    hops: int
    flooded: int = 0


def ancestor(graph: HnGraph, u: int, i: int) -> int:
    """First node of level >= ``i`` on ``u``'s parent chain."""
    lev, parent = graph.lev, graph.parent
    x = u
    while lev[x] < i:
        x = int(parent[x])
        if x < 0:
            raise UnreachableError(f"parent chain of {u} ends below level {i}")
    return x


def ancestor_chain(graph: HnGraph, u: int) -> list[int]:
    chain = [u]
    parent = graph.parent
    while parent[chain[-1]] >= 0:
        chain.append(int(parent[chain[-1]]))
    return chain


def component_at_level(graph: HnGraph, u: int, i: int) -> set[int]:
    """Component of ``u`` in the subgraph induced on ``{v : lev(v) >= i}``."""
    lev = graph.lev
    if lev[u] < i:
        raise ParameterError(f"node {u} has level {lev[u]} < {i}")
    adj = graph.adj
    seen = {u}
    stack = [u]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen and lev[w] >= i:
                seen.add(w)
                stack.append(w)
    return seen


def _tier_bfs(graph: HnGraph, u: int, i: int):
    """BFS order and predecessors over same-level edges among level-``i`` nodes."""
    lev, adj = graph.lev, graph.adj
    pred = {u: None}
    order = [u]
    if lev[u] != i:
        return order, pred
    q = deque([u])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w not in pred and lev[w] == i:
                pred[w] = v
                order.append(w)
                q.append(w)
    return order, pred


def routing_tier(graph: HnGraph, u: int, i: int) -> set[int]:
    if graph.lev[u] < i:
        raise ParameterError(f"node {u} has level {graph.lev[u]} < {i}")
    return set(_tier_bfs(graph, u, i)[0])


def bfs_hops(graph: HnGraph, src: int) -> dict[int, int]:
    adj = graph.adj
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


# -- proactive ---------------------------------------------------------------


@dataclass
class RoutingState:
    """Per-(node, level) directories: ``directory[(u, i)][dst] = (next_hop, hops)``."""

    graph: HnGraph
    directory: dict = field(default_factory=dict)
    built_for: str = ""
    components: int = 1

    @property
    def connected(self) -> bool:
        return self.components <= 1

    def top(self, u: int) -> dict:
        return self.directory[(u, int(self.graph.lev[u]))]

    def entries(self) -> int:
        return sum(len(d) for d in self.directory.values())


def _better(a, b):
    # (next_hop, hops): fewer hops, then lower next hop id
    return a[1] < b[1] or (a[1] == b[1] and a[0] < b[0])


def _distance_vector(tier, adj_in_tier, seeds):
    """Synchronous Bellman-Ford to convergence inside one tier.

    A node never lists itself; each neighbor advertises itself at one hop.
    """
    table = {v: dict(seeds[v]) for v in tier}
    while True:
        changed = False
        new = {}
        for v in tier:
            cur = dict(seeds[v])
            for w in adj_in_tier[v]:
                old = cur.get(w)
                if old is None or _better((w, 1), old):
                    cur[w] = (w, 1)
                for dst, (_, h) in table[w].items():
                    if dst == v:
                        continue
                    cand = (w, h + 1)
                    old = cur.get(dst)
                    if old is None or _better(cand, old):
                        cur[dst] = cand
            if cur != table[v]:
                changed = True
            new[v] = cur
        table = new
        if not changed:
            return table


def build_directories(graph: HnGraph) -> RoutingState:
    """Bottom-up hierarchical distance vector.

    For each level ``i``: every node of level >= ``i`` starts from its own
    entry, what it carried from level ``i - 1`` and what its children pushed;
    nodes of level exactly ``i`` then exchange tables with same-level
    neighbors until convergence.  Each node finally pushes its table to its
    ancestor at ``i + 1`` (itself, when its level is higher).
    """
    lev = graph.lev.tolist()
    parent = graph.parent.tolist()
    adj = graph.adj
    n = graph.n
    directory = {}
    if n == 0:
        return RoutingState(graph, directory, graph.fingerprint(), 0)
    top = max(lev)
    pushed = [dict() for _ in range(n)]
    for i in range(top + 1):
        active = [v for v in range(n) if lev[v] >= i]
        seeds = {}
        for v in active:
            s = dict(directory.get((v, i - 1), {})) if i > 0 else {}
            for dst, entry in pushed[v].items():
                old = s.get(dst)
                if old is None or _better(entry, old):
                    s[dst] = entry
            seeds[v] = s
        pushed = [dict() for _ in range(n)]
        done = set()
        for v in active:
            if v in done:
                continue
            tier, _ = _tier_bfs(graph, v, i)
            done.update(tier)
            in_tier = {x: [w for w in adj[x] if lev[w] == i and lev[x] == i] for x in tier}
            table = _distance_vector(tier, in_tier, seeds)
            for x in tier:
                directory[(x, i)] = table[x]
        for v in active:
            if lev[v] > i:
                continue
            par = parent[v]
            if par < 0:
                continue
            up = pushed[par]
            if v not in up or _better((v, 1), up[v]):
                up[v] = (v, 1)
            for dst, (_, h) in directory[(v, i)].items():
                if dst == par:
                    continue
                cand = (v, h + 1)
                old = up.get(dst)
                if old is None or _better(cand, old):
                    up[dst] = cand
    from hngraph.metrics import component_count

    return RoutingState(graph, directory, graph.fingerprint(), component_count(graph))


def proactive_route(state: RoutingState, src: int, dst: int) -> RouteResult:
    graph = state.graph
    if src == dst:
        return RouteResult((src,), 0, 0)
    lev, parent = graph.lev, graph.parent
    path = [src]
    x, lo = src, 0
    entry = None
    while entry is None:
        if x == dst:
            return RouteResult(tuple(path), len(path) - 1, 0)
        for j in range(lo, int(lev[x]) + 1):
            entry = state.directory[(x, j)].get(dst)
            if entry is not None:
                break
        if entry is None:
            par = int(parent[x])
            if par < 0:
                raise UnreachableError(f"{dst} is not listed along the ancestor chain of {src}")
            lo = int(lev[x]) + 1
            x = par
            path.append(x)
    cur = x
    guard = graph.n + 1
    while True:
        cur = entry[0]
        path.append(cur)
        if cur == dst:
            break
        entry = state.top(cur)[dst]
        guard -= 1
        if guard < 0:
            raise RuntimeError("directory loop")
    return RouteResult(tuple(path), len(path) - 1, 0)


# -- reactive ----------------------------------------------------------------


def _flood(graph: HnGraph, x: int, k: int):
    """Nodes reached when ``x`` floods its level-``k`` tier and every flooded
    node asks its children to flood theirs, recursively.  Returns the BFS
    predecessor map (insertion order is processing order)."""
    lev, kids, adj = graph.lev, graph.children, graph.adj
    pred = {x: None}
    q = deque([x])
    while q:
        v = q.popleft()
        if v != x or lev[x] == k:
            lv = lev[v]
            for w in adj[v]:
                if w not in pred and lev[w] == lv:
                    pred[w] = v
                    q.append(w)
        for c in kids[v]:
            if c not in pred:
                pred[c] = v
                q.append(c)
    return pred


def reactive_route(graph: HnGraph, src: int, dst: int) -> RouteResult:
    if src == dst:
        return RouteResult((src,), 0, 1)
    lev = graph.lev
    processed = set()
    ascent = [src]
    x = src
    k = 0
    top = int(lev.max())
    while k <= top:
        if lev[x] < k:
            par = int(graph.parent[x])
            if par < 0:
                break
            x = par
            ascent.append(x)
            continue
        pred = _flood(graph, x, k)
        processed.update(pred)
        if dst in pred:
            tail = []
            v = dst
            while v is not None:
                tail.append(v)
                v = pred[v]
            path = ascent + tail[::-1][1:]
            return RouteResult(tuple(path), len(path) - 1, len(processed))
        # phases below lev(x) would flood a subset of phase lev(x)
        k = int(lev[x]) if lev[x] > k else k + 1
    raise UnreachableError(f"{dst} not found from {src} (flooded {len(processed)} nodes)")

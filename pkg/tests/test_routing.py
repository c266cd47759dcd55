import numpy as np
import pytest

from hngraph.core import LevelAssignment, Params, build_from_levels, build_graph, build_radius_bounded
from hngraph.errors import ParameterError, UnreachableError
from hngraph.geometry import PointSet, Region, uniform_points
from hngraph.routing import (
    ancestor,
    bfs_hops,
    build_directories,
    component_at_level,
    proactive_route,
    reactive_route,
    routing_tier,
)

SQ = Region("square", 10.0)


def forced(xy, levels):
    pts = PointSet(np.array(xy, dtype=float), SQ)
    return build_from_levels(pts, LevelAssignment(np.array(levels), np.zeros(len(levels), dtype=int)))


def graph(seed, n=300):
    return build_graph(uniform_points(SQ, n, seed), None, Params(0.5), seed=seed)


def edge_walk(g, path):
    edges = {(a, b) for a, b, _ in g.edges.tolist()}
    return all((min(x, y), max(x, y)) in edges for x, y in zip(path, path[1:]))


def test_ancestor_chain_example():
    # u:0 -> a:2 -> b:4
    g = forced([[1, 1], [1.5, 1], [5, 5]], [0, 2, 4])
    assert ancestor(g, 0, 0) == 0
    assert ancestor(g, 0, 1) == 1
    assert ancestor(g, 0, 3) == 2


def test_ancestor_broken_chain():
    pts = PointSet(np.array([[1.0, 1.0], [6.0, 6.0]]), SQ)
    g = build_from_levels(pts, LevelAssignment(np.array([0, 1]), np.zeros(2, dtype=int)), radius_limit=2.0)
    with pytest.raises(UnreachableError):
        ancestor(g, 0, 1)


def test_ancestor_levels_property():
    g = graph(1)
    for u in range(g.n):
        for i in range(int(g.lev.max()) + 1):
            assert g.lev[ancestor(g, u, i)] >= i


def test_component_at_level():
    g = graph(2)
    assert component_at_level(g, 0, 0) == set(range(g.n))
    top = int(g.lev.max())
    tops = {u for u in range(g.n) if g.lev[u] == top}
    assert component_at_level(g, min(tops), top) == tops
    u = int(np.argmax(g.lev == 1))
    comp = component_at_level(g, u, 1)
    assert all(g.lev[v] >= 1 for v in comp)
    # closure: no member has a qualifying neighbor outside
    assert all(w in comp for v in comp for w in g.adj[v] if g.lev[w] >= 1)
    with pytest.raises(ParameterError):
        component_at_level(g, int(np.argmax(g.lev == 0)), 1)


def test_two_node_graph():
    g = forced([[1, 1], [2, 2]], [0, 0])
    st = build_directories(g)
    assert st.directory[(0, 0)] == {1: (1, 1)}
    assert st.directory[(1, 0)] == {0: (0, 1)}
    r = proactive_route(st, 0, 1)
    assert r.path == (0, 1) and r.hops == 1 and r.flooded == 0


def test_star_example():
    # centre 0 at level 1, leaves spread so no two share a ball
    g = forced([[5, 5], [5, 6], [6, 4], [4, 4]], [1, 0, 0, 0])
    st = build_directories(g)
    assert st.directory[(0, 1)] == {1: (1, 1), 2: (2, 1), 3: (3, 1)}
    for leaf in (1, 2, 3):
        assert st.directory[(leaf, 0)] == {}
        assert (leaf, 1) not in st.directory


def test_src_equals_dst():
    g = graph(3, 50)
    st = build_directories(g)
    assert proactive_route(st, 7, 7).path == (7,)
    r = reactive_route(g, 7, 7)
    assert r.hops == 0 and r.flooded == 1


def test_reactive_first_phase_hit():
    g = graph(4)
    u = next(v for v in range(g.n) if g.lev[v] == 0 and any(g.lev[w] == 0 for w in g.adj[v]))
    w = next(x for x in g.adj[u] if g.lev[x] == 0)
    r = reactive_route(g, u, w)
    assert r.path[-1] == w
    assert r.path == (u, w) or r.hops >= 1
    assert r.flooded <= len(component_at_level(g, u, 0))
    assert u in routing_tier(g, u, 0) and w in routing_tier(g, u, 0)


@pytest.mark.parametrize("seed", range(6))
def test_routes_valid_and_lower_bounded(seed):
    g = graph(seed)
    st = build_directories(g)
    assert st.connected
    rng = np.random.default_rng(seed)
    for _ in range(60):
        a, b = (int(x) for x in rng.integers(0, g.n, 2))
        lower = bfs_hops(g, a)[b]
        for r in (proactive_route(st, a, b), reactive_route(g, a, b)):
            assert r.path[0] == a and r.path[-1] == b
            assert edge_walk(g, r.path)
            assert r.hops == len(r.path) - 1 >= lower
        assert reactive_route(g, a, b).flooded <= g.n


@pytest.mark.parametrize("seed", range(3))
def test_directory_invariants(seed):
    g = graph(seed, 200)
    st = build_directories(g)
    top = int(g.lev.max())
    for (u, i), table in st.directory.items():
        assert 0 <= i <= g.lev[u]
        assert u not in table
        for dst, (nh, h) in table.items():
            assert nh in g.adj[u]
            # follow next hops; the walk must take exactly h steps
            cur, steps = nh, 1
            while cur != dst:
                cur = st.top(cur)[dst][0]
                steps += 1
            assert steps == h
            nxt = st.top(nh).get(dst)
            assert nh == dst or h <= 1 + nxt[1]
    for u in range(g.n):
        if g.lev[u] == top:
            assert len(st.top(u)) == g.n - 1


def test_directories_deterministic():
    g = graph(9, 150)
    assert build_directories(g).directory == build_directories(g).directory


def test_disconnected_graph_reports_unreachable():
    pts = uniform_points(SQ, 80, 1)
    g = build_radius_bounded(pts, None, Params(0.5), 0.8, seed=1)
    st = build_directories(g)
    assert not st.connected
    from hngraph.metrics import component_count

    assert st.components == component_count(g) > 1
    far = [(a, b) for a in range(g.n) for b in range(g.n) if b not in bfs_hops(g, a)]
    a, b = far[0]
    with pytest.raises(UnreachableError):
        proactive_route(st, a, b)
    with pytest.raises(UnreachableError):
        reactive_route(g, a, b)

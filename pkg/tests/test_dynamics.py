import numpy as np
import pytest

from hngraph.core import LevelAssignment, Params, build_from_levels, build_graph
from hngraph.dynamics import (
    DynamicGraph,
    add_node,
    check_against_rebuild,
    parse_events,
    random_event,
    remove_node,
    replay,
    update_weight,
)
from hngraph.errors import NotFoundError, ParameterError
from hngraph.geometry import PointSet, Region, uniform_points
from hngraph.metrics import is_connected

SQ = Region("square", 10.0)


def forced(xy, levels, weights=None):
    pts = PointSet(np.array(xy, dtype=float).reshape(-1, 2), SQ)
    lev = LevelAssignment(np.array(levels, dtype=int), np.zeros(len(levels), dtype=int))
    return build_from_levels(pts, lev, Params(0.5), weights=weights)


def test_add_into_empty_graph():
    g = forced([], [])
    g2, delta = add_node(g, (1.0, 1.0), 1.0, increment=0)
    assert g2.n == 1 and g2.num_edges == 0
    assert delta.added_edges == () and delta.removed_edges == ()
    assert delta.affected == {0}


def test_add_high_level_node_reparents_and_truncates():
    # node 0 (level 0) has its parent far away, so its ball holds level-0 node 1
    g = forced([[1, 1], [2, 1], [9, 9]], [0, 0, 1])
    assert (0, 1, 0) in g.edge_set()
    dg = DynamicGraph.from_graph(g)
    before = dg.edge_set()
    delta = dg.add_node((1.5, 1.0), 32.0, increment=0)  # level 5, midway between 0 and 1
    new = dg.next_id - 1
    assert dg.parent[0] == new and dg.parent[1] == new
    assert set(delta.removed_edges) == {(0, 1, 0), (0, 2, 0), (1, 2, 0)}
    assert delta.apply(before) == dg.edge_set()
    assert check_against_rebuild(dg)


def test_add_far_low_node_is_local():
    xy = [[1, 1], [1.2, 1], [1.1, 1.3], [9, 9], [9, 1]]
    g = forced(xy, [0, 0, 1, 2, 1])
    dg = DynamicGraph.from_graph(g)
    delta = dg.add_node((9.5, 0.5), 1.0, increment=0)
    new = dg.next_id - 1
    assert all(new in (a, b) for a, b, _ in delta.added_edges + delta.removed_edges)
    assert {0, 1}.isdisjoint(delta.affected)


def test_remove_single_top_node():
    g = forced([[3, 3]], [0])
    g2, _ = remove_node(g, 0)
    assert g2.n == 0


def test_remove_leaf_only_touches_its_edges():
    g = build_graph(uniform_points(SQ, 60, 1), seed=1)
    leaf = next(u for u in range(g.n) if not g.children[u] and g.lev[u] == 0)
    g2, delta = remove_node(g, leaf)
    assert delta.added_edges == ()
    assert all(leaf in (a, b) for a, b, _ in delta.removed_edges)
    assert {e for e in g.edge_set() if leaf not in e[:2]} == g2.edge_set()


def test_remove_hub_orphans_find_nearest_survivor():
    g = build_graph(uniform_points(SQ, 80, 2), seed=2)
    hub = max(range(g.n), key=lambda u: len(g.children[u]) if g.parent[u] >= 0 else -1)
    dg = DynamicGraph.from_graph(g)
    dg.remove_node(hub)
    assert check_against_rebuild(dg)


def test_unknown_ids_raise():
    dg = DynamicGraph.from_graph(forced([[1, 1]], [0]))
    with pytest.raises(NotFoundError):
        dg.remove_node(5)
    with pytest.raises(NotFoundError):
        dg.update_weight(5, 2.0)
    with pytest.raises(ParameterError):
        dg.update_weight(0, 0.5)
    with pytest.raises(ParameterError):
        dg.add_node((11.0, 1.0))


def test_weight_change_same_det_level_is_empty():
    g = forced([[1, 1], [2, 2], [5, 5]], [2, 0, 3], weights=[4.0, 1.0, 8.0])
    _, delta = update_weight(g, 0, 7.0)
    assert delta.empty


def test_weight_drop_lowers_level():
    g = forced([[1, 1], [2, 2], [5, 5], [8, 8]], [3, 0, 1, 4], weights=[8.0, 1.0, 2.0, 16.0])
    g2, delta = update_weight(g, 0, 4.0)
    assert g2.lev[0] == 2
    dg = DynamicGraph.from_graph(g)
    dg.update_weight(0, 4.0)
    assert check_against_rebuild(dg)


def test_drain_sequence_matches_rebuild():
    pts = uniform_points(SQ, 40, 5)
    w = np.full(40, 64.0)
    dg = DynamicGraph.from_graph(build_graph(pts, w, Params(0.5), seed=5))
    rng = np.random.default_rng(0)
    for _ in range(100):
        u = int(rng.choice(sorted(dg.pos)))
        dg.update_weight(u, max(1.0, dg.weight[u] / 2))
        assert check_against_rebuild(dg)


@pytest.mark.parametrize("seq", range(40))
def test_random_sequences_match_rebuild(seq):
    rng = np.random.default_rng(seq)
    region = Region("torus" if seq % 2 else "square", 10.0)
    g = build_graph(uniform_points(region, int(rng.integers(0, 40)), seq), seed=seq)
    dg = DynamicGraph.from_graph(g)
    for _ in range(50):
        before = dg.edge_set()
        ev = random_event(dg, rng)
        (_, delta), = replay(dg, [ev], rng)
        assert delta.apply(before) == dg.edge_set()
        assert set(delta.affected) >= {x for e in delta.added_edges + delta.removed_edges for x in e[:2]}
        assert check_against_rebuild(dg)
        if len(dg):
            assert is_connected(dg.snapshot())


def test_bounded_repair_filters_by_radius():
    rng = np.random.default_rng(3)
    dg = DynamicGraph(SQ, Params(0.5), bounded=True)
    for _ in range(60):
        dg.add_node(tuple(rng.random(2) * 9.9), 1.0, rng=rng, radius=1.5)
    snap = dg.snapshot()
    assert snap.edge_set() <= dg.edge_set(bounded=False)
    assert all(snap.edge_length(a, b) <= 1.5 for a, b, _ in snap.edges.tolist())
    assert check_against_rebuild(dg)


def test_parse_events():
    text = "# trace\nADD 1.0 2.0 4\nREMOVE 3\nweight 2 8.5  # drain\nADD 1 1 1 0.7\n"
    assert parse_events(text.splitlines()) == [
        ("ADD", 1.0, 2.0, 4.0, None), ("REMOVE", 3), ("WEIGHT", 2, 8.5), ("ADD", 1.0, 1.0, 1.0, 0.7)]
    with pytest.raises(ParameterError):
        parse_events(["MOVE 1 2"])


@pytest.mark.parametrize("seq", range(15))
def test_lattice_ties_match_rebuild(seq):
    # half-unit lattice positions force exact distance ties between candidates
    rng = np.random.default_rng(1000 + seq)
    dg = DynamicGraph(Region("square", 10.0), Params(0.5))
    for _ in range(60):
        r = rng.random()
        if r < 0.5 or len(dg) == 0:
            dg.add_node(tuple(np.floor(rng.random(2) * 20) / 2), float(rng.choice([1, 2, 4, 8])), rng=rng)
        elif r < 0.7:
            dg.remove_node(int(rng.choice(sorted(dg.pos))))
        else:
            dg.update_weight(int(rng.choice(sorted(dg.pos))), float(rng.choice([1, 2, 4, 8, 16])))
        assert check_against_rebuild(dg)

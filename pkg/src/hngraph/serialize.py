"""Line-oriented text format for built graphs.

::

    hngraph 1
    n <n> p <p> cap <cap|-> region <kind>:<side> seed <seed|-> bounded <0|1> pseed <seed|->
    node <id> <x> <y> <weight> <level> <parent-id|-1> [<radius>]
    ...
    edge <id_u> <id_v> <level>
    ...

Floats are written with ``repr`` so a dump/load round trip is bit-exact.
"""
from __future__ import annotations

import numpy as np

from hngraph.core import HnGraph, LevelAssignment, Params, det_level
from hngraph.errors import ParameterError
from hngraph.geometry import PointSet, Region

MAGIC = "hngraph 1"


def _opt(value):
    return "-" if value is None else repr(value)


def dumps(graph: HnGraph) -> str:
    bounded = graph.radius_limit is not None
    lines = [
        MAGIC,
        f"n {graph.n} p {graph.params.p!r} cap {_opt(graph.params.max_level_cap)} "
        f"region {graph.region} seed {_opt(graph.seed)} bounded {int(bounded)} "
        f"pseed {_opt(graph.points.seed)}",
    ]
    ids = graph.ids.tolist()
    xy = graph.xy.tolist()
    lev = graph.lev.tolist()
    w = graph.weights.tolist()
    for i in range(graph.n):
        par = graph.parent[i]
        fields = ["node", str(ids[i]), repr(xy[i][0]), repr(xy[i][1]), repr(w[i]), str(lev[i]),
                  str(ids[par] if par >= 0 else -1)]
        if bounded:
            fields.append(repr(float(graph.radius_limit[i])))
        lines.append(" ".join(fields))
    for a, b, k in graph.edges.tolist():
        lines.append(f"edge {ids[a]} {ids[b]} {k}")
    return "\n".join(lines) + "\n"


def _header(tokens):
    it = iter(tokens)
    return dict(zip(it, it))


def loads(text: str) -> HnGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != MAGIC:
        raise ParameterError("not an hngraph dump")
    head = _header(lines[1].split())
    try:
        p = float(head["p"])
        cap = None if head["cap"] == "-" else int(head["cap"])
        region = Region.parse(head["region"])
        seed = None if head["seed"] == "-" else int(head["seed"])
        bounded = head["bounded"] == "1"
        n = int(head["n"])
        pseed = head.get("pseed", "-")
        pseed = None if pseed == "-" else int(pseed)
    except KeyError as exc:
        raise ParameterError(f"graph header misses {exc}") from None
    params = Params(p, cap)
    ids, xy, w, lev, par_ids, radii = [], [], [], [], [], []
    edge_rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        tok = line.split()
        if tok[0] == "node":
            ids.append(int(tok[1]))
            xy.append((float(tok[2]), float(tok[3])))
            w.append(float(tok[4]))
            lev.append(int(tok[5]))
            par_ids.append(int(tok[6]))
            if bounded:
                radii.append(float(tok[7]))
        elif tok[0] == "edge":
            edge_rows.append((int(tok[1]), int(tok[2]), int(tok[3])))
        else:
            raise ParameterError(f"line {lineno}: unknown record {tok[0]!r}")
    if len(ids) != n:
        raise ParameterError(f"header says {n} nodes, found {len(ids)}")
    points = PointSet(np.array(xy, dtype=float).reshape(-1, 2), region, pseed, ids=ids)
    index = {nid: i for i, nid in enumerate(ids)}
    det = np.array([det_level(x, p) for x in w], dtype=np.int64)
    levels = LevelAssignment(det, np.array(lev, dtype=np.int64) - det)
    parent = np.array([index[q] if q >= 0 else -1 for q in par_ids], dtype=np.int64)
    edges = np.array(
        sorted((min(index[a], index[b]), max(index[a], index[b]), k) for a, b, k in edge_rows),
        dtype=np.int64,
    ).reshape(-1, 3)
    weights = np.array(w, dtype=float)
    radius = np.array(radii, dtype=float) if bounded else None
    for arr in (parent, edges, weights) + ((radius,) if bounded else ()):
        arr.setflags(write=False)
    return HnGraph(points, params, weights, levels, parent, edges, radius, seed)


def dump(graph: HnGraph, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(graph))


def load(path) -> HnGraph:
    with open(path) as fh:
        return loads(fh.read())

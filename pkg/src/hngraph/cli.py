"""``hngraph`` command line: run experiments from flat configs, verify
invariants at desk scale, dump graphs and replay event traces."""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path

import numpy as np

from hngraph import __version__
from hngraph import metrics as M
from hngraph.config import ConfigError, ExperimentConfig, parse_lines, parse_override, resolve
from hngraph.core import Params, build_graph, build_radius_bounded
from hngraph.dynamics import DynamicGraph, check_against_rebuild, parse_events, random_event, replay
from hngraph.errors import HnError
from hngraph.geometry import Region, poisson_points, uniform_points
from hngraph.rng import derive_seed
from hngraph.routing import build_directories, proactive_route, reactive_route
from hngraph.serialize import dumps
from hngraph.wsn import (CSV_COLUMNS, AggregationModel, EnergyConfig, rows, run_hn_simulation,
                         run_leach_baseline)

OUT_ENV = "HNGRAPH_OUT"
DEFAULT_OUT = "hngraph-out"


def fnum(x) -> str:
    """Shortest exact decimal (never scientific) for floats."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return np.format_float_positional(x, unique=True, trim="-")
    return str(x)


def csv_text(header, body) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in body:
        w.writerow([fnum(v) for v in row])
    return buf.getvalue()


# -- experiment builders ------------------------------------------------------
# each returns {filename: csv text}


def _points(cfg: ExperimentConfig):
    region = cfg["region"]
    if cfg.get("lambda") is not None:
        return poisson_points(region, cfg["lambda"], derive_seed(cfg.seed, "points"))
    return uniform_points(region, cfg["n"], derive_seed(cfg.seed, "points"))


def _graph(cfg: ExperimentConfig):
    pts = _points(cfg)
    params = Params(cfg["p"])
    lseed = derive_seed(cfg.seed, "levels")
    if cfg.get("radius") is not None:
        return build_radius_bounded(pts, None, params, cfg["radius"], seed=lseed)
    return build_graph(pts, None, params, seed=lseed)


def exp_build(cfg):
    g = _graph(cfg)
    ids = g.ids
    nodes = ((int(ids[i]), g.xy[i, 0], g.xy[i, 1], g.weights[i], int(g.lev[i]),
              int(ids[g.parent[i]]) if g.parent[i] >= 0 else -1, int(g.degrees[i])) for i in range(g.n))
    edges = ((int(ids[a]), int(ids[b]), k, g.edge_length(a, b)) for a, b, k in g.edges.tolist())
    return {
        "nodes.csv": csv_text(("id", "x", "y", "weight", "level", "parent", "degree"), nodes),
        "edges.csv": csv_text(("u", "v", "level", "length"), edges),
        "graph.txt": dumps(g),
    }


def _replay_rows(dg, events, rng):
    for step, (ev, delta) in enumerate(replay(dg, events, rng), start=1):
        yield (step, " ".join(fnum(t) for t in ev if t is not None), len(delta.added_edges),
               len(delta.removed_edges), len(delta.reparented), len(delta.affected),
               len(dg), int(check_against_rebuild(dg)))


REPLAY_HEADER = ("step", "event", "added", "removed", "reparented", "affected", "nodes", "matches_rebuild")


def exp_dynamics(cfg, events_text=None):
    dg = DynamicGraph.from_graph(_graph(cfg))
    rng = np.random.default_rng(derive_seed(cfg.seed, "events"))
    if events_text is None and cfg.get("events"):
        events_text = Path(cfg["events"]).read_text()
    if events_text is not None:
        events = parse_events(events_text.splitlines())
        body = list(_replay_rows(dg, events, rng))
    else:
        body = []
        gen = np.random.default_rng(derive_seed(cfg.seed, "event-trace"))
        for _ in range(cfg["random_events"]):
            ev = random_event(dg, gen)
            body.extend((len(body) + 1,) + r[1:] for r in _replay_rows(dg, [ev], rng))
    return {"replay.csv": csv_text(REPLAY_HEADER, body), "graph.txt": dumps(dg.snapshot())}


def exp_route(cfg):
    g = _graph(cfg)
    state = build_directories(g)
    rng = np.random.default_rng(derive_seed(cfg.seed, "pairs"))
    body = []
    for _ in range(cfg["pairs"] if g.n else 0):
        a, b = (int(x) for x in rng.integers(0, g.n, size=2))
        for name, fn in (("proactive", lambda: proactive_route(state, a, b)),
                         ("reactive", lambda: reactive_route(g, a, b))):
            try:
                r = fn()
                body.append((int(g.ids[a]), int(g.ids[b]), name, r.hops, r.flooded,
                             " ".join(str(int(g.ids[v])) for v in r.path)))
            except HnError:
                body.append((int(g.ids[a]), int(g.ids[b]), name, -1, -1, ""))
    return {"route.csv": csv_text(("src", "dst", "protocol", "hops", "flooded", "path"), body)}


def exp_degree(cfg):
    region, p, lam = cfg["region"], cfg["p"], cfg["lambda"]
    seeds = [derive_seed(cfg.seed, "degree", t) for t in range(cfg["trials"])]
    res = M.run_trials(lambda s: M.mean_degree(lam, region, p, s), seeds, cfg["jobs"])
    means = np.array([m for m, _ in res])
    se = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else math.nan
    per_trial = ((t, n, m) for t, (m, n) in enumerate(res))
    summary = [("grand_mean", float(means.mean())), ("stderr", se),
               ("bound_poisson", M.degree_bound_poisson(p)), ("bound_arbitrary", M.degree_bound_arbitrary(p))]
    return {"degree_trials.csv": csv_text(("trial", "nodes", "mean_degree"), per_trial),
            "degree_summary.csv": csv_text(("statistic", "value"), summary)}


def exp_lambda_min(cfg):
    def one(r):
        return M.find_lambda_min(r, cfg["p"], cfg["region"], cfg["step"], cfg["trials"],
                                 derive_seed(cfg.seed, "lambda-min", repr(r)), cfg["confirm"])

    res = M.run_trials(one, cfg["radii"], cfg["jobs"])
    body = ((t.r, t.lambda_min, t.scaled, t.step, t.trials, t.increments_checked) for t in res)
    return {"lambda_min.csv": csv_text(("r", "lambda_min", "lambda_min_r2", "step", "trials", "confirm"), body)}


BETAS = (2, 3, 4, 5)


def exp_stretch(cfg):
    region, p, lam = cfg["region"], cfg["p"], cfg["lambda"]
    graphs = [
        build_graph(poisson_points(region, lam, derive_seed(cfg.seed, "points", t)), None, Params(p),
                    seed=derive_seed(cfg.seed, "levels", t))
        for t in range(cfg["trials"])
    ]
    hist_rows, summary = [], []
    for d in cfg["distances"]:
        s = np.concatenate([M.stretch_samples(g, d, cfg["tolerance"], derive_seed(cfg.seed, "pairs", t))
                            for t, g in enumerate(graphs)])
        s = s[np.isfinite(s)]
        if not len(s):
            raise ConfigError(f"no pairs within {cfg['tolerance']} of distance {d}")
        top = max(float(s.max()), 1.0)
        edges = np.arange(1.0, top + cfg["bin_width"], cfg["bin_width"])
        if len(edges) < 2 or edges[-1] < top:
            edges = np.append(edges, edges[-1] + cfg["bin_width"])
        h = M.Histogram.of(s, edges)
        for (lo, hi, c), mid in zip(h.rows(), h.centers):
            hist_rows.append((d, lo, hi, c) + tuple(float(mid) ** b for b in BETAS))
        slope, _, r2 = M.log_linear_fit(h.centers, h.counts)
        summary.append((d, len(s), float(s.mean()), float((s > 2).mean()), slope, r2))
    header = ("distance", "stretch_lo", "stretch_hi", "count") + tuple(f"power_stretch_b{b}" for b in BETAS)
    return {"stretch.csv": csv_text(header, hist_rows),
            "stretch_summary.csv": csv_text(("distance", "pairs", "mean_stretch", "tail_gt2", "log_slope", "r2"),
                                            summary)}


def exp_hops(cfg):
    region, p, lam = cfg["region"], cfg["p"], cfg["lambda"]
    body = []
    for t in range(cfg["trials"]):
        g = build_graph(poisson_points(region, lam, derive_seed(cfg.seed, "points", t)), None, Params(p),
                        seed=derive_seed(cfg.seed, "levels", t))
        hs = M.hop_stats(g, derive_seed(cfg.seed, "pairs", t), cfg["bucket_width"])
        for lo, hi, n, m in zip(hs.distance_edges[:-1], hs.distance_edges[1:], hs.bucket_pairs, hs.bucket_mean_hops):
            body.append((t, lo, hi, int(n), m, hs.unreachable))
    return {"hops.csv": csv_text(("trial", "dist_lo", "dist_hi", "pairs", "mean_hops", "unreachable"), body)}


def exp_height(cfg):
    n, p, trials = cfg["n"], cfg["p"], cfg["trials"]
    tail = M.height_tail(trials, n, p, derive_seed(cfg.seed, "height"))
    body = ((k, q, math.sqrt(q * (1 - q) / trials), M.height_tail_bound(n, p, k)) for k, q in enumerate(tail))
    return {"height.csv": csv_text(("k", "tail", "stderr", "bound"), body)}


def wsn_results(cfg) -> list:
    energy = cfg.energy()
    pts = uniform_points(cfg["region"], cfg["n"], derive_seed(cfg.seed, "wsn-points"))
    sim_seed = derive_seed(cfg.seed, "wsn")
    jobs = [("hn", m) for m in cfg["aggregation"]] + ([("leach", None)] if cfg["leach"] else [])

    def one(job):
        kind, model = job
        if kind == "hn":
            return run_hn_simulation(pts, energy, model, cfg["p"], sim_seed, cfg["max_rounds"])
        return run_leach_baseline(pts, energy, cfg["k"], sim_seed, cfg["max_rounds"])

    return M.run_trials(one, jobs, cfg["jobs"])


def exp_wsn(cfg):
    results = wsn_results(cfg)
    full, a, b, c, summary = [], [], [], [], []
    for res in results:
        full.extend(rows(res))
        for s in res.rounds:
            a.append((res.protocol, res.aggregation, s.t_seconds, s.cum_effective))
            b.append((res.protocol, res.aggregation, s.cum_energy_j, s.cum_effective,
                      s.cum_effective / s.cum_energy_j if s.cum_energy_j else 0.0))
            c.append((res.protocol, res.aggregation, s.t_seconds, s.nodes_alive))
        last = res.rounds[-1]
        summary.append((res.protocol, res.aggregation, len(res.rounds), res.lifetime_seconds,
                        last.cum_effective, last.cum_energy_j, last.cum_effective / last.cum_energy_j,
                        res.max_round_deaths(), res.conservation_error()))
    key = ("protocol", "aggregation")
    return {
        "wsn_rounds.csv": csv_text(CSV_COLUMNS, full),
        "fig4a_data_over_time.csv": csv_text(key + ("t_seconds", "cum_effective"), a),
        "fig4b_data_per_energy.csv": csv_text(key + ("cum_energy_j", "cum_effective", "effective_per_joule"), b),
        "fig4c_nodes_alive.csv": csv_text(key + ("t_seconds", "nodes_alive"), c),
        "wsn_summary.csv": csv_text(key + ("rounds", "lifetime_s", "cum_effective", "cum_energy_j",
                                           "effective_per_joule", "max_round_deaths", "conservation_rel_err"),
                                    summary),
    }


EXPERIMENTS = {
    "build": exp_build, "dynamics": exp_dynamics, "route": exp_route, "degree": exp_degree,
    "lambda-min": exp_lambda_min, "stretch": exp_stretch, "hops": exp_hops, "height": exp_height,
    "wsn": exp_wsn,
}


# -- verify suites ------------------------------------------------------------


class Report:
    def __init__(self, out):
        self.out = out
        self.ok = True

    def check(self, name, value, threshold, passed):
        self.ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {fnum(value)} (threshold {fnum(threshold)})", file=self.out)


def verify_degree_bounds(rep, seed, jobs):
    region, lam, p = Region("torus", 10.0), 100.0, 0.5
    seeds = [derive_seed(seed, "degree", t) for t in range(50)]
    means = np.array([m for m, _ in M.run_trials(lambda s: M.mean_degree(lam, region, p, s), seeds, jobs)])
    top = float(means.mean() + 3 * means.std(ddof=1) / math.sqrt(len(means)))
    rep.check("mean degree + 3se vs 7/p", top, M.degree_bound_poisson(p), top < M.degree_bound_poisson(p))
    rep.check("mean degree + 3se vs 1/p + 6/(p(1-p))", top, M.degree_bound_arbitrary(p),
              top < M.degree_bound_arbitrary(p))


def verify_height_tail(rep, seed, jobs):
    n, p, trials = 100, 0.5, 2000
    tail = M.height_tail(trials, n, p, derive_seed(seed, "height"))
    worst = max(q - (M.height_tail_bound(n, p, k) + 3 * math.sqrt(q * (1 - q) / trials))
                for k, q in enumerate(tail) if q > 0)
    rep.check("max over k of tail - (bound + 3se)", worst, 0.0, worst <= 0)


def verify_lambda_min(rep, seed, jobs):
    radii = (1.0, 1.6)
    res = M.run_trials(lambda r: M.find_lambda_min(r, 0.5, Region("square", 10.0), 0.1 / (r * r), 1,
                                                   derive_seed(seed, "lambda-min", repr(r))), radii, jobs)
    vals = [t.scaled for t in res]
    for t in res:
        rep.check(f"lambda_min*r^2 at r={t.r} within [2.9, 4.4]", t.scaled, "3.62 +- 20%", 2.9 <= t.scaled <= 4.4)
    spread = (max(vals) - min(vals)) / float(np.mean(vals))
    rep.check("relative spread of lambda_min*r^2 across r", spread, 0.25, spread < 0.25)


def verify_repair_oracle(rep, seed, jobs):
    bad = 0
    for s in range(30):
        rng = np.random.default_rng(derive_seed(seed, "repair", s))
        region = Region("square", 10.0)
        g = build_graph(uniform_points(region, int(rng.integers(0, 30)), derive_seed(seed, "pts", s)),
                        seed=derive_seed(seed, "lev", s))
        dg = DynamicGraph.from_graph(g)
        for ev in (random_event(dg, rng) for _ in range(50)):
            before = dg.edge_set()
            delta = next(iter(d for _, d in replay(dg, [ev], rng)))
            if delta.apply(before) != dg.edge_set() or not check_against_rebuild(dg):
                bad += 1
                break
    rep.check("sequences diverging from rebuild (of 30)", bad, 0, bad == 0)


def verify_routing_oracle(rep, seed, jobs):
    from hngraph.routing import bfs_hops

    bad = 0
    for s in range(10):
        g = build_graph(uniform_points(Region("square", 10.0), 200, derive_seed(seed, "pts", s)),
                        seed=derive_seed(seed, "lev", s))
        state = build_directories(g)
        edges = {(a, b) for a, b, _ in g.edges.tolist()}
        rng = np.random.default_rng(s)
        for _ in range(20):
            a, b = (int(x) for x in rng.integers(0, g.n, size=2))
            lower = bfs_hops(g, a)[b]
            for r in (proactive_route(state, a, b), reactive_route(g, a, b)):
                walk = all((min(x, y), max(x, y)) in edges for x, y in zip(r.path, r.path[1:]))
                if not (walk and r.path[0] == a and r.path[-1] == b and r.hops >= lower):
                    bad += 1
    rep.check("invalid routes (of 400)", bad, 0, bad == 0)


def verify_energy_conservation(rep, seed, jobs):
    pts = uniform_points(Region("square", 100.0), 30, derive_seed(seed, "wsn-points"))
    cfg = EnergyConfig(init_energy=0.3)
    runs = [run_hn_simulation(pts, cfg, AggregationModel(), 0.5, seed),
            run_hn_simulation(pts, cfg, AggregationModel("limited", 10), 0.5, seed),
            run_leach_baseline(pts, cfg, 5, seed)]
    worst = max(r.conservation_error() for r in runs)
    rep.check("max relative conservation error", worst, 1e-9, worst < 1e-9)


SUITES = {
    "degree-bounds": verify_degree_bounds, "height-tail": verify_height_tail,
    "lambda-min": verify_lambda_min, "repair-oracle": verify_repair_oracle,
    "routing-oracle": verify_routing_oracle, "energy-conservation": verify_energy_conservation,
}


# -- plumbing ------------------------------------------------------------------


def load_config(path, overrides, seed=None) -> ExperimentConfig:
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        raw = parse_lines(text, str(path))
    for item in overrides or ():
        k, v = parse_override(item)
        raw[k] = v
    if seed is not None:
        raw["seed"] = str(seed)
    return resolve(raw)


def out_dir(args, cfg) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or cfg.get("out") or DEFAULT_OUT)


def write_artifacts(directory: Path, files: dict, cfg: ExperimentConfig):
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        with open(directory / name, "w", newline="") as fh:
            fh.write(text)
    with open(directory / "manifest.txt", "w", newline="") as fh:
        fh.write(cfg.manifest(__version__))


def _with_jobs(cfg, jobs):
    if jobs is None:
        return cfg
    return ExperimentConfig(cfg.kind, {**cfg.values, "jobs": jobs})


def cmd_run(args):
    cfg = _with_jobs(load_config(args.config, args.set, args.seed), args.jobs)
    files = EXPERIMENTS[cfg.kind](cfg)
    d = out_dir(args, cfg)
    write_artifacts(d, files, cfg)
    print(f"wrote {', '.join(sorted(files))}, manifest.txt to {d}")
    return 0


def cmd_verify(args):
    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    rep = Report(sys.stdout)
    SUITES[args.suite](rep, args.seed or 0, args.jobs or 1)
    print("OK" if rep.ok else "FAILED")
    return 0 if rep.ok else 1


def cmd_graph_dump(args):
    overrides = list(args.set or [])
    raw_kind = ["kind=build"] if args.config is None else []
    cfg = load_config(args.config, raw_kind + overrides, args.seed)
    if cfg.kind != "build":
        raise ConfigError(f"graph-dump needs kind = build, got {cfg.kind}")
    text = dumps(_graph(cfg))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_replay(args):
    overrides = (["kind=dynamics"] if args.config is None else []) + list(args.set or [])
    cfg = load_config(args.config, overrides, args.seed)
    if cfg.kind != "dynamics":
        raise ConfigError(f"replay needs kind = dynamics, got {cfg.kind}")
    try:
        events_text = Path(args.events).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read events {args.events}: {exc.strerror}") from None
    files = exp_dynamics(cfg, events_text)
    d = out_dir(args, cfg)
    write_artifacts(d, files, cfg)
    print(f"wrote replay.csv, graph.txt, manifest.txt to {d}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hngraph", description=__doc__)
    ap.add_argument("--version", action="version", version=f"hngraph {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="flat key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--out", help=f"output location (else ${OUT_ENV}, else config 'out')")
        p.add_argument("--jobs", type=int, help="worker threads for independent trials")

    p = sub.add_parser("run", help="run an experiment and write CSV artifacts")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", help="run a desk-scale acceptance suite")
    p.add_argument("suite", help=", ".join(SUITES))
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("graph-dump", help="build one graph and print its serialized form")
    common(p)
    p.set_defaults(func=cmd_graph_dump)
    p = sub.add_parser("replay", help="apply an ADD/REMOVE/WEIGHT event trace")
    common(p)
    p.add_argument("events", help="event trace file")
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (HnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Round-based data collation over hierarchical neighbor graphs, with a
first-order radio model and a LEACH-style clustering baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from hngraph.core import Params, build_graph
from hngraph.errors import ParameterError
from hngraph.geometry import PointSet
from hngraph.rng import derive_seed


@dataclass(frozen=True)
class EnergyConfig:
    e_elec: float = 50e-9  # J/bit
    eps_fs: float = 10e-12  # J/bit/m^2
    e_da: float = 5e-9  # J/bit/signal
    signal_bytes: int = 500
    header_bytes: int = 25
    bandwidth: float = 1e6  # bit/s
    init_energy: float = 2.0
    death_threshold: float = 0.1
    round_seconds: float = 20.0
    bs_x: float = 50.0
    bs_y: float = 175.0

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("bs_x", "bs_y"):
                continue
            if not getattr(self, f.name) > 0:
                raise ParameterError(f"{f.name} must be positive")
        if not self.death_threshold < self.init_energy:
            raise ParameterError("death_threshold must be below init_energy")

    @property
    def packet_bits(self) -> int:
        return 8 * (self.signal_bytes + self.header_bytes)

    @property
    def signal_bits(self) -> int:
        return 8 * self.signal_bytes

    @property
    def bs(self) -> tuple[float, float]:
        return (self.bs_x, self.bs_y)


@dataclass(frozen=True)
class AggregationModel:
    kind: str = "unlimited"
    ratio: int = 0

    def __post_init__(self):
        if self.kind not in ("unlimited", "limited"):
            raise ParameterError(f"unknown aggregation {self.kind!r}")
        if self.kind == "limited" and self.ratio < 1:
            raise ParameterError("limited aggregation needs ratio >= 1")

    @classmethod
    def parse(cls, text: str) -> "AggregationModel":
        """``unlimited`` or ``limited:<ratio>``."""
        kind, _, ratio = text.strip().partition(":")
        if kind == "limited":
            try:
                return cls("limited", int(ratio))
            except ValueError:
                raise ParameterError(f"bad aggregation {text!r}") from None
        if ratio:
            raise ParameterError(f"bad aggregation {text!r}")
        return cls(kind)

    def __str__(self):
        return "unlimited" if self.kind == "unlimited" else f"limited:{self.ratio}"


def energy_tx(bits: float, d: float, cfg: EnergyConfig) -> float:
    return bits * cfg.e_elec + bits * cfg.eps_fs * d * d


def energy_rx(bits: float, cfg: EnergyConfig) -> float:
    return bits * cfg.e_elec


def aggregate(incoming, own: int, model: AggregationModel, cfg: EnergyConfig):
    """Fuse incoming packets (given by their effective counts) with ``own`` signals.

    Returns ``(effective count per outgoing packet, fusion energy)``.
    """
    incoming = list(incoming)
    if any(c < 0 for c in incoming) or own < 0:
        raise ParameterError("effective counts must be non-negative")
    total = sum(incoming) + own
    fused = len(incoming) + own
    cost = cfg.e_da * cfg.signal_bits * fused
    if model.kind == "unlimited" or total == 0:
        return [total], cost
    full, rest = divmod(total, model.ratio)
    return [model.ratio] * full + ([rest] if rest else []), cost


@dataclass(frozen=True)
class RoundStats:
    round: int
    t_seconds: float
    nodes_alive: int
    raw_signals: int
    effective_signals: int
    cum_raw: int
    cum_effective: int
    energy_j: float
    cum_energy_j: float
    deaths: int


CSV_COLUMNS = (
    "round", "t_seconds", "nodes_alive", "raw_signals", "effective_signals",
    "cum_effective", "energy_j", "cum_energy_j", "protocol", "aggregation",
)


@dataclass
class SimulationResult:
    protocol: str
    aggregation: str
    rounds: list
    initial: np.ndarray
    residual: np.ndarray

    @property
    def lifetime_rounds(self) -> int:
        """Rounds after which at least one node was still alive."""
        return sum(1 for s in self.rounds if s.nodes_alive > 0)

    @property
    def lifetime_seconds(self) -> float:
        return self.rounds[-1].t_seconds if self.rounds else 0.0

    def conservation_error(self) -> float:
        consumed = math.fsum(s.energy_j for s in self.rounds)
        drained = math.fsum((self.initial - self.residual).tolist())
        return abs(consumed - drained) / drained if drained else abs(consumed)

    def max_round_deaths(self) -> int:
        return max((s.deaths for s in self.rounds), default=0)


class _Ledger:
    """Per-node battery with debits summed per round."""

    def __init__(self, n, cfg):
        self.cfg = cfg
        self.residual = np.full(n, cfg.init_energy)
        self.alive = np.ones(n, dtype=bool)
        self.spent = []

    def debit(self, u, joules):
        self.residual[u] -= joules
        self.spent.append(joules)

    def close_round(self):
        energy = math.fsum(self.spent)
        self.spent = []
        dying = self.alive & (self.residual < self.cfg.death_threshold)
        self.alive &= ~dying
        return energy, int(dying.sum())


def _bs_distance(xy, cfg):
    return np.hypot(xy[:, 0] - cfg.bs_x, xy[:, 1] - cfg.bs_y)


def _run(points: PointSet, cfg, max_rounds, step):
    n = len(points)
    if n == 0:
        raise ParameterError("simulation needs at least one node")
    ledger = _Ledger(n, cfg)
    rounds = []
    cum_raw = cum_eff = 0
    cum_energy = 0.0
    r = 0
    while ledger.alive.any() and r < max_rounds:
        alive = np.flatnonzero(ledger.alive)
        raw, eff = step(r, alive, ledger)
        energy, deaths = ledger.close_round()
        r += 1
        cum_raw += raw
        cum_eff += eff
        cum_energy += energy
        rounds.append(RoundStats(r, r * cfg.round_seconds, int(ledger.alive.sum()), raw, eff,
                                 cum_raw, cum_eff, energy, cum_energy, deaths))
    return rounds, ledger


def run_hn_simulation(
    points: PointSet,
    cfg: EnergyConfig = EnergyConfig(),
    model: AggregationModel = AggregationModel(),
    p: float = 0.5,
    seed: int = 0,
    max_rounds: int = 1_000_000,
) -> SimulationResult:
    """Every round rebuilds the graph over live nodes with weight
    ``max(1, battery / threshold)``; data flows leaf to root and top-level
    nodes send to the base station."""
    xy_all = points.xy
    bits = cfg.packet_bits
    params = Params(p)
    bs_d = _bs_distance(xy_all, cfg)
    e_rx = energy_rx(bits, cfg)

    def step(r, alive, ledger):
        sub = PointSet(xy_all[alive], points.region, None, ids=alive)
        w = np.maximum(1.0, ledger.residual[alive] / cfg.death_threshold)
        g = build_graph(sub, w, params, seed=derive_seed(seed, "hn-round", r))
        lev, parent = g.lev, g.parent
        inbox = [[] for _ in range(g.n)]
        delivered = 0
        # children always sit on a strictly lower level than their parent
        for v in np.argsort(lev, kind="stable").tolist():
            u = int(alive[v])
            if inbox[v]:
                out, cost = aggregate(inbox[v], 1, model, cfg)
                ledger.debit(u, cost)
            else:
                out = [1]
            par = int(parent[v])
            if par < 0:
                d = bs_d[u]
                delivered += sum(out)
            else:
                d = math.dist(xy_all[u], xy_all[alive[par]])
                inbox[par].extend(out)
                ledger.debit(int(alive[par]), e_rx * len(out))
            ledger.debit(u, energy_tx(bits, d, cfg) * len(out))
        return len(alive), delivered

    rounds, ledger = _run(points, cfg, max_rounds, step)
    return SimulationResult("hn", str(model), rounds, np.full(len(points), cfg.init_energy), ledger.residual)


def run_leach_baseline(
    points: PointSet,
    cfg: EnergyConfig = EnergyConfig(),
    k: int = 5,
    seed: int = 0,
    max_rounds: int = 1_000_000,
) -> SimulationResult:
    """Randomized head rotation: each epoch of ``ceil(N/k)`` rounds every
    live node serves as head at most once."""
    if k < 1:
        raise ParameterError("k must be at least 1")
    n = len(points)
    xy = points.xy
    bits = cfg.packet_bits
    bs_d = _bs_distance(xy, cfg)
    e_rx = energy_rx(bits, cfg)
    epoch = math.ceil(n / k)
    rng = np.random.default_rng(derive_seed(seed, "leach"))
    served = np.zeros(n, dtype=bool)

    def step(r, alive, ledger):
        if r % epoch == 0:
            served[:] = False
        eligible = alive[~served[alive]]
        if len(eligible) < min(k, len(alive)):
            served[:] = False
            eligible = alive
        heads = np.sort(rng.choice(eligible, size=min(k, len(eligible)), replace=False))
        served[heads] = True
        is_head = np.zeros(n, dtype=bool)
        is_head[heads] = True
        members = alive[~is_head[alive]]
        load = dict.fromkeys(heads.tolist(), 0)
        if len(members):
            dx = xy[members, None, :] - xy[None, heads, :]
            dist = np.hypot(dx[..., 0], dx[..., 1])
            nearest = np.argmin(dist, axis=1)
            for i, (m, j) in enumerate(zip(members.tolist(), nearest.tolist())):
                h = int(heads[j])
                ledger.debit(m, energy_tx(bits, float(dist[i, j]), cfg))
                ledger.debit(h, e_rx)
                load[h] += 1
        delivered = 0
        for h, got in load.items():
            if got:
                _, cost = aggregate([1] * got, 1, AggregationModel(), cfg)
                ledger.debit(h, cost)
            ledger.debit(h, energy_tx(bits, bs_d[h], cfg))
            delivered += got + 1
        return len(alive), delivered

    rounds, ledger = _run(points, cfg, max_rounds, step)
    return SimulationResult("leach", f"cluster:{k}", rounds, np.full(n, cfg.init_energy), ledger.residual)


def rows(result: SimulationResult):
    for s in result.rounds:
        yield (s.round, s.t_seconds, s.nodes_alive, s.raw_signals, s.effective_signals,
               s.cum_effective, s.energy_j, s.cum_energy_j, result.protocol, result.aggregation)

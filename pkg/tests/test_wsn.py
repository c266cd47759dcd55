import math

import numpy as np
import pytest

from hngraph.errors import ParameterError
from hngraph.geometry import PointSet, Region, uniform_points
from hngraph.wsn import (
    AggregationModel,
    EnergyConfig,
    aggregate,
    energy_rx,
    energy_tx,
    run_hn_simulation,
    run_leach_baseline,
)

CFG = EnergyConfig()
FIELD = Region("square", 100.0)
UNLIMITED = AggregationModel()


def test_energy_model_examples():
    assert energy_tx(0, 10, CFG) == 0
    assert CFG.packet_bits == 4200
    assert energy_tx(4200, 10, CFG) == pytest.approx(2.142e-4, rel=1e-12)
    assert energy_rx(4200, CFG) == pytest.approx(2.1e-4, rel=1e-12)
    assert energy_rx(4200, CFG) == energy_tx(4200, 0, CFG)
    amp = lambda d: energy_tx(4200, d, CFG) - energy_rx(4200, CFG)
    assert amp(20) == pytest.approx(4 * amp(10))


def test_aggregate_examples():
    out, cost = aggregate([], 1, UNLIMITED, CFG)
    assert out == [1] and cost == pytest.approx(CFG.e_da * 4000)
    assert aggregate([5, 7], 1, UNLIMITED, CFG)[0] == [13]
    assert aggregate([5, 7], 1, AggregationModel("limited", 10), CFG)[0] == [10, 3]
    assert aggregate([5, 7], 1, UNLIMITED, CFG)[1] == pytest.approx(CFG.e_da * 4000 * 3)


def test_config_validation():
    with pytest.raises(ParameterError):
        EnergyConfig(death_threshold=3.0)
    with pytest.raises(ParameterError):
        EnergyConfig(e_elec=0.0)
    with pytest.raises(ParameterError):
        AggregationModel("limited", 0)
    assert AggregationModel.parse("limited:20") == AggregationModel("limited", 20)
    assert str(AggregationModel.parse("unlimited")) == "unlimited"
    with pytest.raises(ParameterError):
        AggregationModel.parse("lossy")


def test_single_node_lifetime_closed_form():
    pts = PointSet(np.array([[50.0, 50.0]]), FIELD)
    res = run_hn_simulation(pts, CFG, UNLIMITED, seed=1)
    c = energy_tx(4200, math.dist((50, 50), CFG.bs), CFG)
    survived = math.floor((CFG.init_energy - CFG.death_threshold) / c)
    assert res.lifetime_rounds == survived
    assert len(res.rounds) == survived + 1
    assert all(s.effective_signals == 1 for s in res.rounds)


def test_leach_single_node_matches_hn():
    pts = PointSet(np.array([[20.0, 70.0]]), FIELD)
    a = run_hn_simulation(pts, CFG, UNLIMITED, seed=1)
    b = run_leach_baseline(pts, CFG, 1, seed=1)
    assert [s.energy_j for s in a.rounds] == pytest.approx([s.energy_j for s in b.rounds])


@pytest.fixture(scope="module")
def small_runs():
    pts = uniform_points(FIELD, 30, 3)
    cfg = EnergyConfig(init_energy=0.3)
    return [
        run_hn_simulation(pts, cfg, UNLIMITED, 0.5, 2),
        run_hn_simulation(pts, cfg, AggregationModel("limited", 5), 0.5, 2),
        run_leach_baseline(pts, cfg, 5, 2),
        run_leach_baseline(pts, cfg, 30, 2),
    ]


def test_energy_conservation(small_runs):
    for res in small_runs:
        assert res.conservation_error() < 1e-9
        assert res.residual.min() >= 0
        assert res.rounds[-1].cum_energy_j <= 30 * 0.3


def test_accounting_invariants(small_runs):
    for res in small_runs:
        alive = [s.nodes_alive for s in res.rounds]
        assert all(a >= b for a, b in zip(alive, alive[1:]))
        assert alive[-1] == 0
        cum = [s.cum_effective for s in res.rounds]
        assert all(a <= b for a, b in zip(cum, cum[1:]))
        for s in res.rounds:
            assert s.cum_effective <= s.cum_raw
            assert s.effective_signals <= s.raw_signals


def test_leach_all_heads_means_direct_transmission():
    pts = uniform_points(FIELD, 10, 4)
    res = run_leach_baseline(pts, CFG, 10, seed=0, max_rounds=1)
    expected = math.fsum(energy_tx(4200, math.dist(tuple(xy), CFG.bs), CFG) for xy in pts.xy)
    assert res.rounds[0].energy_j == pytest.approx(expected, rel=1e-12)


def test_leach_round_traffic_counts():
    # 100 nodes, 5 heads: 95 member transmissions, 95 head receptions, 95 fusions, 5 uplinks
    pts = uniform_points(FIELD, 100, 5)
    res = run_leach_baseline(pts, CFG, 5, seed=0, max_rounds=1)
    e = res.rounds[0].energy_j
    rx_and_fuse = 95 * energy_rx(4200, CFG) + 100 * CFG.e_da * 4000
    elec_tx = 100 * 4200 * CFG.e_elec
    assert e > rx_and_fuse + elec_tx
    assert res.rounds[0].effective_signals == 100


def test_simulation_deterministic():
    pts = uniform_points(FIELD, 20, 8)
    cfg = EnergyConfig(init_energy=0.2)
    a = run_hn_simulation(pts, cfg, UNLIMITED, 0.5, 4)
    b = run_hn_simulation(pts, cfg, UNLIMITED, 0.5, 4)
    assert a.rounds == b.rounds


def test_empty_field_rejected():
    with pytest.raises(ParameterError):
        run_hn_simulation(uniform_points(FIELD, 0, 0))
    with pytest.raises(ParameterError):
        run_leach_baseline(uniform_points(FIELD, 3, 0), k=0)

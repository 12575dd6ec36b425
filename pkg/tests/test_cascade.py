import itertools

import numpy as np
import pytest

from feedcontagion.cascade import (
    CascadeConfig,
    Model,
    exhaustive_icm_oracle,
    icm_node_frequencies,
    run,
    run_fsm,
    run_icm,
    run_threshold,
    sweep,
)
from feedcontagion.events import EXPOSURE, INFECTION
from feedcontagion.graph import DirectedGraph, configuration_model, random_tree, regular_degrees

# 1 follows 0, 2 follows 1: content flows 0 -> 1 -> 2
PATH = DirectedGraph.from_edges(3, [(1, 0), (2, 1)])
TRIANGLE = DirectedGraph.from_undirected(3, [(0, 1), (1, 2), (0, 2)])


def mean_size(g, model, mu, seeds, runs, seed=0):
    rng = np.random.default_rng(seed)
    cfg = CascadeConfig(model, mu=mu, seeds=seeds)
    return np.mean([run(g, cfg, rng).size for _ in range(runs)])


def test_config_validation():
    with pytest.raises(ValueError):
        CascadeConfig(Model.ICM)
    with pytest.raises(ValueError):
        CascadeConfig(Model.ICM, mu=0.5, phi=0.5)
    with pytest.raises(ValueError):
        CascadeConfig(Model.THRESHOLD, phi=0.0)
    with pytest.raises(ValueError):
        CascadeConfig(Model.FSM, mu=1.5)
    assert CascadeConfig("icm", mu=0.2).model is Model.ICM


@pytest.mark.parametrize("mu, size", [(0.0, 1), (1.0, 3)])
def test_path_deterministic(mu, size):
    assert run_icm(PATH, CascadeConfig(Model.ICM, mu=mu, seeds=(0,)), 0).size == size


def test_path_oracle():
    d = exhaustive_icm_oracle(PATH, CascadeConfig(Model.ICM, mu=0.5, seeds=(0,)))
    assert d.mean == pytest.approx(1.75)
    assert d.size_distribution == pytest.approx({1: 0.5, 2: 0.25, 3: 0.25})
    assert mean_size(PATH, Model.ICM, 0.5, (0,), 20000) == pytest.approx(1.75, abs=0.03)


def test_triangle_examples():
    assert exhaustive_icm_oracle(TRIANGLE, CascadeConfig(Model.ICM, mu=0.5, seeds=(0,))).mean == pytest.approx(2.25)
    assert mean_size(TRIANGLE, Model.ICM, 0.5, (0,), 20000) == pytest.approx(2.25, abs=0.03)
    assert mean_size(TRIANGLE, Model.FSM, 0.5, (0,), 20000) == pytest.approx(2.0, abs=0.03)


def test_threshold_examples():
    assert run_threshold(TRIANGLE, CascadeConfig(Model.THRESHOLD, phi=0.5, seeds=(0,))).size == 3
    assert run_threshold(TRIANGLE, CascadeConfig(Model.THRESHOLD, phi=0.6, seeds=(0,))).size == 1
    g = DirectedGraph.from_edges(5, [(1, 0), (2, 1), (3, 2), (0, 4)])
    r = run_threshold(g, CascadeConfig(Model.THRESHOLD, phi=1e-9, seeds=(0,)))
    assert set(r.infected.tolist()) == {0, 1, 2, 3}


def brute_force_oracle(g, mu, seeds):
    """Independent reference: enumerate activations and flood-fill in python."""
    edges = list(zip(g.friend.tolist(), g.follower.tolist()))
    probs = np.zeros(g.node_count)
    for mask in itertools.product((0, 1), repeat=len(edges)):
        w = np.prod([mu if m else 1 - mu for m in mask])
        reached = set(seeds)
        frontier = list(seeds)
        while frontier:
            u = frontier.pop()
            for (a, b), m in zip(edges, mask):
                if m and a == u and b not in reached:
                    reached.add(b)
                    frontier.append(b)
        for v in reached:
            probs[v] += w
    return probs


def test_oracle_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(5):
        g = DirectedGraph(5, rng.integers(0, 5, 7), rng.integers(0, 5, 7))
        d = exhaustive_icm_oracle(g, CascadeConfig(Model.ICM, mu=0.35, seeds=(0,)))
        np.testing.assert_allclose(d.node_probability, brute_force_oracle(g, 0.35, [0]), atol=1e-12)
        assert sum(d.size_distribution.values()) == pytest.approx(1.0)


def test_oracle_limits():
    d1 = exhaustive_icm_oracle(TRIANGLE, CascadeConfig(Model.ICM, mu=1.0, seeds=(0,)))
    assert d1.size_distribution == {3: 1.0}
    d0 = exhaustive_icm_oracle(TRIANGLE, CascadeConfig(Model.ICM, mu=0.0, seeds=(0, 1)))
    assert d0.size_distribution == {2: 1.0}


def test_oracle_too_large():
    g = configuration_model(regular_degrees(20, 3), seed=0)
    with pytest.raises(ValueError, match="enumeration"):
        exhaustive_icm_oracle(g, CascadeConfig(Model.ICM, mu=0.5, seeds=(0,)))


def test_node_frequencies_against_oracle():
    g = DirectedGraph.from_edges(4, [(1, 0), (2, 0), (3, 1), (3, 2)])
    exact = exhaustive_icm_oracle(g, CascadeConfig(Model.ICM, mu=0.5, seeds=(0,))).node_probability
    freq = icm_node_frequencies(g, 0.5, (0,), 50_000, seed=3)
    se = np.sqrt(exact * (1 - exact) / 50_000)
    assert np.all(np.abs(freq - exact) <= 4 * se + 1e-12)


def test_result_invariants():
    g = configuration_model(regular_degrees(500, 3), seed=2)
    for model in (Model.ICM, Model.FSM):
        r = run(g, CascadeConfig(model, mu=0.7, seeds=(0, 5)), 4)
        assert {0, 5} <= set(r.infected.tolist())
        assert r.size == len(r.infected) == sum(r.per_step_counts)


def test_determinism():
    g = configuration_model(regular_degrees(500, 3), seed=2)
    cfg = CascadeConfig(Model.ICM, mu=0.6, seeds=(1,))
    a, b = run_icm(g, cfg, 9), run_icm(g, cfg, 9)
    np.testing.assert_array_equal(a.infect_time, b.infect_time)
    t1 = sweep(g, Model.FSM, [0.3, 0.8], 20, master_seed=5)
    t2 = sweep(g, Model.FSM, [0.3, 0.8], 20, master_seed=5)
    np.testing.assert_array_equal(t1.sizes, t2.sizes)


def test_event_log_capture():
    r = run_icm(PATH, CascadeConfig(Model.ICM, mu=1.0, seeds=(0,)), 0, capture=True, item_id=7)
    log = r.event_log
    inf = log.of_kind(INFECTION)
    ex = log.of_kind(EXPOSURE)
    assert sorted(inf.user.tolist()) == [0, 1, 2]
    assert sorted(zip(ex.user.tolist(), ex.friend.tolist())) == [(1, 0), (2, 1)]
    assert np.all(log.item == 7)
    # every non-seed infection is preceded by an exposure
    for u, t in zip(inf.user, inf.time):
        if u != 0:
            assert ex.time[ex.user == u].min() <= t


def test_fsm_once_ever():
    # node 2 follows 0 and 1; under FSM its single trial is at first exposure
    g = DirectedGraph.from_edges(3, [(2, 0), (2, 1), (1, 0)])
    exact_icm = exhaustive_icm_oracle(g, CascadeConfig(Model.ICM, mu=0.5, seeds=(0,))).node_probability[2]
    freq = np.mean([2 in run_fsm(g, CascadeConfig(Model.FSM, mu=0.5, seeds=(0,)), s).infected for s in range(8000)])
    assert exact_icm == pytest.approx(0.625)
    assert freq == pytest.approx(0.5, abs=0.02)


def test_fsm_equals_icm_on_tree():
    g = random_tree(60, seed=4)
    a = mean_size(g, Model.ICM, 0.6, (0,), 6000, seed=1)
    b = mean_size(g, Model.FSM, 0.6, (0,), 6000, seed=2)
    assert a == pytest.approx(b, rel=0.06)


def test_fsm_below_icm():
    g = configuration_model(regular_degrees(300, 4), seed=0)
    assert mean_size(g, Model.FSM, 0.5, (0,), 300) < mean_size(g, Model.ICM, 0.5, (0,), 300)


def test_sweep_edges_of_grid():
    g = configuration_model(regular_degrees(200, 3), seed=1)
    t = sweep(g, Model.ICM, [0.0, 1.0], 10, master_seed=0)
    assert t.rows[0].mean_size == 1.0
    assert t.rows[1].mean_size == g.node_count  # 3-regular config graphs are connected at this size
    assert t.rows[1].epidemic_share == 1.0


def test_sweep_threshold_grid_is_phi():
    t = sweep(TRIANGLE, Model.THRESHOLD, [0.5, 0.6], 3, seed_policy=[0])
    assert [r.mean_size for r in t.rows] == [3.0, 1.0]


def test_sweep_monotone_in_mu():
    g = configuration_model(regular_degrees(1000, 3), seed=3)
    t = sweep(g, Model.ICM, np.linspace(0, 1, 6), 60, master_seed=1)
    m = t.column("mean_size")
    se = t.column("std") / np.sqrt(60)
    assert np.all(np.diff(m) >= -3 * (se[1:] + se[:-1]))


def test_bad_seeds():
    with pytest.raises(ValueError):
        run_icm(PATH, CascadeConfig(Model.ICM, mu=0.5, seeds=(5,)), 0)
    with pytest.raises(ValueError):
        run_icm(PATH, CascadeConfig(Model.ICM, mu=0.5), 0)

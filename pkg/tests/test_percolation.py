import numpy as np
import pytest
from scipy import optimize

from feedcontagion.graph import DirectedGraph, configuration_model, power_law_degrees
from feedcontagion.percolation import GeneratingFunctions, critical_transmissibility, from_graph, giant_outbreak_fraction, theory_curve

TRIANGLE = DirectedGraph.from_undirected(3, [(0, 1), (1, 2), (0, 2)])
STAR4 = DirectedGraph.from_undirected(5, [(0, i) for i in range(1, 5)])


def regular(k):
    pk = np.zeros(k + 1)
    pk[k] = 1
    return GeneratingFunctions(pk)


def bisection_S(gf, T):
    """Independent oracle: smallest root of u - G1(1 - T + T u) by bracketing."""
    f = lambda u: u - gf.G1(1 - T + T * u)
    grid = np.linspace(0, 1, 2001)
    vals = f(grid)
    i = np.flatnonzero(vals >= -1e-14)[0]
    u = 0.0 if i == 0 else optimize.brentq(f, grid[i - 1], grid[i], xtol=1e-14)
    return 1 - gf.G0(1 - T + T * u)


def test_from_graph_examples():
    gf = from_graph(TRIANGLE)
    assert gf.pk.tolist() == [0, 0, 1]
    assert gf.G0(0.5) == pytest.approx(0.25) and gf.G1(0.5) == pytest.approx(0.5)
    assert from_graph(DirectedGraph.from_undirected(2, [(0, 1)])).G1(0.3) == pytest.approx(1.0)
    p = from_graph(STAR4).pk
    assert p[1] == pytest.approx(0.8) and p[4] == pytest.approx(0.2)


def test_pk_must_normalize():
    with pytest.raises(ValueError):
        GeneratingFunctions(np.array([0.5, 0.4]))


@pytest.mark.parametrize("k, tc", [(3, 0.5), (2, 1.0), (1, 1.0)])
def test_critical_transmissibility(k, tc):
    assert critical_transmissibility(regular(k)) == pytest.approx(tc)


def test_regular_examples():
    gf = regular(3)
    assert giant_outbreak_fraction(gf, 0.4).S == pytest.approx(0.0, abs=1e-8)
    t = giant_outbreak_fraction(gf, 1.0)
    assert t.u == pytest.approx(0.0, abs=1e-9) and t.S == pytest.approx(1.0)
    assert giant_outbreak_fraction(gf, 0.0).S == pytest.approx(0.0)


@pytest.mark.parametrize("T", [0.55, 0.6, 0.75, 0.9])
def test_fixed_point_matches_bisection(T):
    gf = regular(3)
    t = giant_outbreak_fraction(gf, T)
    assert t.converged
    assert t.S == pytest.approx(bisection_S(gf, T), abs=1e-8)
    assert abs(t.u - gf.G1(1 - T + T * t.u)) < 1e-9


def test_powerlaw_monotone_and_threshold():
    rng = np.random.default_rng(0)
    gf = from_graph(configuration_model(power_law_degrees(5000, 2.5, rng, k_min=1), seed=1))
    T = np.linspace(0, 1, 41)
    S = np.array([t.S for t in theory_curve(gf, T)])
    assert np.all(np.diff(S) >= -1e-9)
    tc = critical_transmissibility(gf)
    assert np.all(S[T < tc] < 1e-6)
    assert np.all(S[T > 1.05 * tc] > 0)
    for t, s in zip(T[::8], S[::8]):
        assert s == pytest.approx(bisection_S(gf, t), abs=1e-6)


def test_T_out_of_range():
    with pytest.raises(ValueError):
        giant_outbreak_fraction(regular(3), 1.5)

import json

import numpy as np
import pytest
from scipy import integrate

from feedcontagion import attention, estimation
from feedcontagion.attention import (
    DIGG,
    TWITTER,
    FeedConfig,
    PositionBias,
    SocialSignalCurve,
    VisibilityKernel,
    attention_ratio,
    inclusion_probabilities,
    measure_position_attention,
    simulate_feed_diffusion,
    simulate_feed_items,
)
from feedcontagion.events import EXPOSURE, INFECTION, SESSION
from feedcontagion.graph import DirectedGraph


def chain(n):
    # u + 1 follows u
    return DirectedGraph.from_edges(n, [(u + 1, u) for u in range(n - 1)])


def quiet_config(**kw):
    """No clutter, flat kernel, every position inspected each session."""
    base = dict(
        kernel=VisibilityKernel(p0=1.0, alpha=0.0, c=60.0),
        bias=PositionBias.uniform(5),
        signal=SocialSignalCurve.none(),
        mode=TWITTER,
        share_prob=1.0,
        session_rate=0.5,
        budget=5,
        horizon=1440.0,
        clutter_rate_per_friend=0.0,
    )
    base.update(kw)
    return FeedConfig(**base)


# --------------------------------------------------------------------------
# kernel, bias, signal


@pytest.mark.parametrize("form", ["power", "exponential"])
def test_kernel_shape(form):
    k = VisibilityKernel(p0=0.8, alpha=1.5, c=30.0, rate_per_friend=0.1, form=form)
    assert k(0.0, 5) == pytest.approx(0.8)
    dt = np.linspace(0, 500, 200)
    assert np.all(np.diff(k(dt, 20)) <= 0)
    for t in (1.0, 10.0, 100.0):
        assert k(t, 300) <= k(t, 50) <= k(t, 5)


@pytest.mark.parametrize("form, alpha", [("power", 2.0), ("power", 1.0), ("power", 0.5), ("exponential", 1.0)])
def test_kernel_integral(form, alpha):
    k = VisibilityKernel(alpha=alpha, c=20.0, form=form)
    exact = integrate.quad(lambda t: float(k(t, 40)), 3.0, 50.0)[0]
    assert float(k.integral(3.0, 50.0, 40)) == pytest.approx(exact, rel=1e-8)


def test_kernel_validation():
    with pytest.raises(ValueError):
        VisibilityKernel(p0=0.0)
    with pytest.raises(ValueError):
        VisibilityKernel(form="lognormal")


def test_default_bias_properties():
    b = PositionBias.default()
    assert np.all(np.diff(b.array) <= 0)
    assert 3.0 <= b.top_to_middle_ratio() <= 5.0
    up = PositionBias.default(uptick=True).array
    assert up[94:].mean() > up[79:90].mean()


def test_signal_curve():
    g = SocialSignalCurve()
    assert g(1) == pytest.approx(1.0)
    assert np.all(np.diff(g(np.arange(1, 50))) >= 0)
    t = SocialSignalCurve(table=(1.0, 1.2, 1.5))
    assert t(3) == pytest.approx(1.5) and t(10) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        SocialSignalCurve(table=(1.0, 0.9))
    with pytest.raises(ValueError):
        SocialSignalCurve(table=(2.0,))


# --------------------------------------------------------------------------
# position attention


def test_uniform_attention_is_flat():
    rel = measure_position_attention(PositionBias.uniform(100), 100, 20_000, 0)
    assert np.all(np.abs(rel - 1.0) < 0.1)


def test_default_attention_ratio():
    rel = measure_position_attention(PositionBias.default(), 100, 20_000, 0)
    assert 3.0 <= attention_ratio(rel) <= 5.0


def test_uptick_attention():
    rel = measure_position_attention(PositionBias.default(uptick=True), 100, 20_000, 0)
    assert rel[94:].mean() > rel[79:90].mean()


def test_inclusion_probabilities_sum_to_budget():
    incl, tail = inclusion_probabilities(PositionBias.default(), 5)
    assert incl.sum() == pytest.approx(5.0, rel=1e-9)
    assert tail == 0.0
    u, t = inclusion_probabilities(PositionBias.uniform(20), 5)
    assert np.allclose(u, 0.25) and t == pytest.approx(0.25)


# --------------------------------------------------------------------------
# simulator


def test_chain_traversed_without_competition():
    res, log = simulate_feed_diffusion(chain(8), quiet_config(), [0], master_seed=1)
    assert res.size == 8
    assert res.infect_time.tolist() == list(range(8))
    assert np.all(np.diff(res.share_time) > 0)


def test_zero_share_probability():
    g = attention.two_strata_graph(200, 10, 5, 50, seed=0)
    res, log = simulate_feed_diffusion(g, quiet_config(share_prob=0.0), [3, 7], master_seed=0)
    assert res.size == 2
    assert len(log.of_kind(INFECTION)) == 2


def test_determinism():
    g = attention.two_strata_graph(300, 20, 5, 100, seed=1)
    cfg = attention.two_strata_config()
    a = simulate_feed_items(g, cfg, 5, master_seed=3)[1]
    b = simulate_feed_items(g, cfg, 5, master_seed=3)[1]
    for name in ("time", "kind", "user", "item", "friend", "signal_k", "position"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


@pytest.fixture(scope="module")
def strata_logs():
    g = attention.two_strata_graph(1500, 120, 5, 300, seed=2)
    return {mode: simulate_feed_items(g, attention.two_strata_config(mode), 60, master_seed=4)[1] for mode in (TWITTER, DIGG)}


@pytest.mark.parametrize("mode", [TWITTER, DIGG])
def test_every_share_follows_an_exposure(strata_logs, mode):
    log = strata_logs[mode]
    ex = log.of_kind(EXPOSURE)
    first = {}
    for it, u, t in zip(ex.item, ex.user, ex.time):
        first.setdefault((int(it), int(u)), t)
    inf = log.of_kind(INFECTION)
    seeds = 0
    for it, u, t, f in zip(inf.item, inf.user, inf.time, inf.friend):
        if f < 0:
            seeds += 1
            continue
        assert first[(int(it), int(u))] <= t
    assert seeds == 60
    # at most one infection per (user, item)
    keys = inf.item * 10**6 + inf.user
    assert np.unique(keys).size == keys.size


def test_digg_signal_counts_infected_friends(strata_logs):
    log = strata_logs[DIGG]
    ex = log.of_kind(EXPOSURE)
    infected_by = {}
    for it, u, f, k in zip(ex.item, ex.user, ex.friend, ex.signal_k):
        key = (int(it), int(u))
        infected_by.setdefault(key, set()).add(int(f))
        assert k == len(infected_by[key])
    # the item appears once: later deliveries keep the first entry's position
    assert np.all(ex.position[ex.signal_k == 1] == 0)


def test_twitter_new_copy_at_top(strata_logs):
    ex = strata_logs[TWITTER].of_kind(EXPOSURE)
    assert np.all(ex.position == 0)
    views = strata_logs[TWITTER].of_kind(SESSION)
    assert len(views) and np.all(views.position >= 0)


def test_high_friend_stratum_responds_less(strata_logs):
    for log in strata_logs.values():
        pt = estimation.pair_table(log)
        low = pt.infected[pt.friend_count < 10].mean()
        high = pt.infected[pt.friend_count > 250].mean()
        assert high < low


def test_reduces_to_independent_cascade():
    """Without clutter and with a short kernel every copy is an independent trial."""
    rng = np.random.default_rng(0)
    g = attention.random_follow_graph(1 + rng.poisson(3.0, 2000), seed=0)
    cfg = quiet_config(kernel=VisibilityKernel(p0=1.0, c=1.0, form="exponential"), share_prob=0.3, session_rate=1.0)
    # many seeds per item so that multi-exposure pairs are common
    _, log = simulate_feed_items(g, cfg, 40, master_seed=5, seeds_per_item=200)
    mu = 1 - np.exp(-cfg.response_kernel().integral(0.0, np.inf, 1))
    curve = estimation.exposure_response(log, max_k=5)
    for k in range(1, 6):
        i = curve.at(k)
        assert curve.ci_lo[i] <= 1 - (1 - mu) ** k <= curve.ci_hi[i]


def test_seeds_not_delivered_to_each_other():
    g = DirectedGraph.from_undirected(3, [(0, 1), (1, 2)])
    _, log = simulate_feed_diffusion(g, quiet_config(share_prob=0.0), [0, 1], master_seed=0)
    ex = log.of_kind(EXPOSURE)
    assert ex.user.tolist() == [2]


def test_feed_config_round_trip(tmp_path):
    cfg = attention.two_strata_config(DIGG)
    p = tmp_path / "feed.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert FeedConfig.from_json(p) == cfg
    d = {"bias": {"kind": "uniform", "length": 10}, "budget": 3}
    assert FeedConfig.from_dict(d).bias == PositionBias.uniform(10)
    with pytest.raises(ValueError, match="unknown"):
        FeedConfig.from_dict({"shareprob": 0.1})
    with pytest.raises(ValueError):
        FeedConfig(mode="myspace")


def test_bad_seeds():
    with pytest.raises(ValueError):
        simulate_feed_diffusion(chain(3), quiet_config(), [5])

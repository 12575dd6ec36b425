import io

import numpy as np
import pytest

from feedcontagion import estimation
from feedcontagion.estimation import (
    AT_INFECTION,
    DEFAULT_STRATA,
    EstimationError,
    ResponseFunction,
    Stratum,
    aggregate_mixture,
    exposure_response,
    fit_icm_mu,
    half_life,
    is_monotone_within_ci,
    log2_bins,
    pair_table,
    parse_strata,
    time_response,
    wilson_interval,
    write_response_csv,
)
from feedcontagion.events import EXPOSURE, INFECTION, EventLog, EventLogBuilder


def build(rows):
    """rows: (time, kind, user, item, friend, friend_count)"""
    b = EventLogBuilder()
    for t, kind, u, it, f, nf in rows:
        b.add(t, kind, u, it, f, nf)
    return b.build()


def single_exposure_log(n_users, infected, item=0, nf=5):
    rows = []
    for u in range(n_users):
        rows.append((1.0, EXPOSURE, u, item, 100, nf))
        if u < infected:
            rows.append((2.0, INFECTION, u, item, 100, nf))
    return build(rows)


def test_one_in_four():
    c = exposure_response(single_exposure_log(4, 1))
    assert c.bin_lo.tolist() == [1.0] and c.trials.tolist() == [4] and c.p[0] == pytest.approx(0.25)
    assert c.odds[0] == pytest.approx(1 / 3)


def test_k_conventions():
    # user 0: exposed by friends 10 and 11, infected between them
    log = build(
        [
            (1.0, EXPOSURE, 0, 0, 10, 5),
            (2.0, INFECTION, 0, 0, 10, 5),
            (3.0, EXPOSURE, 0, 0, 11, 5),
            (1.0, EXPOSURE, 1, 0, 10, 5),
            (1.5, EXPOSURE, 1, 0, 10, 5),  # repeat from the same friend
        ]
    )
    pt = pair_table(log)
    assert pt.k_final.tolist() == [2, 1] and pt.k_at_infection.tolist() == [1, 1]
    assert exposure_response(log).bin_lo.tolist() == [1.0, 2.0]
    assert exposure_response(log, convention=AT_INFECTION).trials.tolist() == [2]


def test_seeds_dropped():
    log = build([(0.0, INFECTION, 0, 0, -1, 3), (1.0, EXPOSURE, 0, 0, 1, 3), (1.0, EXPOSURE, 1, 0, 0, 3)])
    pt = pair_table(log)
    assert pt.user.tolist() == [1]


def test_empty_inputs():
    with pytest.raises(EstimationError):
        exposure_response(EventLog.empty())
    with pytest.raises(EstimationError):
        exposure_response(build([(0.0, INFECTION, 0, 0, -1, 3)]))


def test_strata_omit_empty():
    log = single_exposure_log(4, 1, nf=5)
    out = exposure_response(log, DEFAULT_STRATA)
    assert list(out) == ["lt10"]


def test_parse_strata():
    s = parse_strata("lt10:0-10,gt250:251-inf")
    assert s == DEFAULT_STRATA
    with pytest.raises(ValueError):
        parse_strata("bad")
    assert Stratum("x", 10, 20).contains([9, 10, 19, 20]).tolist() == [False, True, True, False]


def test_wilson_interval_reference():
    # statsmodels proportion_confint(3, 10, method="wilson")
    lo, hi = wilson_interval(3, 10)
    assert lo == pytest.approx(0.10779126740630104, abs=1e-9)
    assert hi == pytest.approx(0.6032218525388546, abs=1e-9)
    lo, hi = wilson_interval(np.array([0, 5]), np.array([5, 5]))
    assert lo[0] == 0.0 and hi[1] == 1.0


def test_response_function_invariants():
    with pytest.raises(EstimationError):
        ResponseFunction([1], [2], [0], [0])
    with pytest.raises(EstimationError):
        ResponseFunction([1], [2], [3], [4])


# --------------------------------------------------------------------------
# time response


def test_log2_bins():
    assert log2_bins(1.0, 10.0).tolist() == [0, 1, 2, 4, 8, 16]
    with pytest.raises(ValueError):
        log2_bins(0.0, 1.0)


def test_all_responses_in_first_bin():
    rows = []
    for u in range(50):
        rows.append((10.0, EXPOSURE, u, 0, 99, 5))
        if u % 2 == 0:
            rows.append((10.5, INFECTION, u, 0, 99, 5))
    c = time_response(build(rows), horizon=100.0)
    assert c.successes[0] == 25 and c.successes[1:].sum() == 0
    assert c.trials[0] == 50 and c.trials[1] == 25


def test_time_response_censors_second_exposure():
    rows = [
        (0.0, EXPOSURE, 0, 0, 1, 5),
        (0.5, EXPOSURE, 0, 0, 2, 5),  # second exposure stops follow-up
        (3.0, INFECTION, 0, 0, 2, 5),
        (0.0, EXPOSURE, 1, 0, 1, 5),
        (3.0, INFECTION, 1, 0, 1, 5),
    ]
    c = time_response(build(rows), horizon=10.0)
    assert c.successes.sum() == 1
    assert c.at_risk.sum() == pytest.approx(0.5 + 3.0)


def test_time_response_recovers_exponential_kernel():
    """Responses at constant hazard give a flat rate curve at that hazard."""
    rng = np.random.default_rng(0)
    n, lam, H = 20_000, 0.05, 40.0
    t = rng.exponential(1 / lam, n)
    rows = [(0.0, EXPOSURE, u, 0, 7, 5) for u in range(n)]
    rows += [(float(x), INFECTION, u, 0, 7, 5) for u, x in enumerate(t) if x < H]
    c = time_response(build(rows), horizon=H)
    lo, hi = c.rate_interval()
    assert np.all((lo <= lam) & (lam <= hi))


def test_half_life():
    c = ResponseFunction([0, 1, 2, 4], [1, 2, 4, 8], [10, 10, 10, 10], [4, 2, 1, 1], kind="age", at_risk=[10, 10, 20, 40])
    # rates 0.4, 0.2, 0.05, 0.025: halves exactly at the second bin's centre
    assert half_life(c) == pytest.approx(np.sqrt(2))


# --------------------------------------------------------------------------
# mixtures


def curve(ks, trials, hits, name="x"):
    ks = np.asarray(ks, float)
    return ResponseFunction(ks, ks + 1, trials, hits, name)


def test_mixture_identity():
    a = curve([1, 2, 3], [100, 80, 60], [10, 16, 18])
    m = aggregate_mixture([a, a])
    np.testing.assert_allclose(m.p, a.p)
    np.testing.assert_array_equal(aggregate_mixture([a]).trials, a.trials)


def test_mixture_artifact():
    # A: high response, supported on k <= 10; B: low response, supported on k <= 100
    ka, kb = np.arange(1, 11), np.arange(1, 101)
    pa = 0.3 + 0.02 * ka
    pb = 0.01 + 0.0005 * kb
    A = curve(ka, np.full(10, 1000), np.round(1000 * pa).astype(int), "A")
    B = curve(kb, np.full(100, 1000), np.round(1000 * pb).astype(int), "B")
    assert is_monotone_within_ci(A) and is_monotone_within_ci(B)
    m = aggregate_mixture([A, B])
    assert m.p[m.at(11)] < m.p[m.at(10)]
    assert not is_monotone_within_ci(m)
    # pooled values stay between the stratum values
    for k in range(1, 11):
        i = m.at(k)
        assert min(A.p[A.at(k)], B.p[B.at(k)]) <= m.p[i] <= max(A.p[A.at(k)], B.p[B.at(k)])


def test_mixture_mismatch():
    a = ResponseFunction([0, 1], [1, 2], [5, 5], [1, 1], kind="age", at_risk=[5, 5])
    b = ResponseFunction([0, 2], [2, 4], [5, 5], [1, 1], kind="age", at_risk=[5, 5])
    with pytest.raises(EstimationError):
        aggregate_mixture([a, b])
    with pytest.raises(EstimationError):
        aggregate_mixture([a, curve([1], [5], [1])])


def test_fit_icm_mu_exact():
    k = np.arange(1, 8)
    trials = np.full(7, 10_000)
    hits = np.round(trials * (1 - 0.7**k)).astype(int)
    assert fit_icm_mu(curve(k, trials, hits)) == pytest.approx(0.3, abs=1e-3)


def test_write_csv():
    buf = io.StringIO()
    write_response_csv([curve([1], [4], [1], "all")], buf, ["master_seed: 0"])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# master_seed: 0"
    assert lines[1] == ",".join(estimation.RESPONSE_COLUMNS)
    assert lines[2].startswith("1,2,4,1,0.25,")
    assert lines[2].endswith(",all,0.333333333333,")  # literal infected:not-infected ratio; no rate for k curves

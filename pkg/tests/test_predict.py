import numpy as np
import pytest

from feedcontagion import attention, predict
from feedcontagion.attention import DIGG, TWITTER, SocialSignalCurve, VisibilityKernel
from feedcontagion.predict import PredictionRecord, RecordTable, calibrate, predict_window, records_from_log, window_response


def age_with_h(h, kernel, n_f=5, window=0.5):
    """Exposure age at which the per-window response equals ``h``."""
    from scipy import optimize

    return optimize.brentq(lambda a: float(window_response(a, n_f, kernel, window)) - h, 0.0, 1e6)


KERNEL = VisibilityKernel(p0=1.0, alpha=2.0, c=5.0)


def test_single_exposure():
    a = age_with_h(0.2, KERNEL)
    for mode in (TWITTER, DIGG):
        assert predict_window([(a, 5)], KERNEL, SocialSignalCurve(), mode) == pytest.approx(0.2)


def test_twitter_two_exposures():
    a = age_with_h(0.2, KERNEL)
    assert predict_window([(a, 5), (a, 5)], KERNEL, mode=TWITTER) == pytest.approx(0.36)


def test_digg_signal():
    a = age_with_h(0.2, KERNEL)
    g = SocialSignalCurve(table=(1.0, 1.25, 1.5))
    assert predict_window([(a, 5)], KERNEL, g, DIGG, k=3) == pytest.approx(0.30)
    # only the oldest exposure's age matters in Digg mode
    assert predict_window([(a, 5), (0.0, 5), (1.0, 5)], KERNEL, g, DIGG) == pytest.approx(0.30)
    # clamped at 1
    assert predict_window([(0.0, 5)], KERNEL.scaled(1.0), SocialSignalCurve(table=(1.0, 50.0)), DIGG, k=2) == 1.0


def test_window_response_definition():
    h = window_response(3.0, 10, KERNEL, 0.5)
    assert h == pytest.approx(1 - np.exp(-KERNEL.integral(3.0, 3.5, 10)))


def test_errors():
    with pytest.raises(ValueError):
        PredictionRecord(0, 0, 0.0, 0.5, (), 1, 0.5, False)
    with pytest.raises(ValueError):
        PredictionRecord(0, 0, 0.0, 0.5, ((1.0, 5),), 1, 1.5, False)
    with pytest.raises(ValueError):
        predict_window([], KERNEL)
    with pytest.raises(ValueError):
        predict_window([(1.0, 5)], KERNEL, window=0.0)
    with pytest.raises(ValueError):
        predict_window([(-1.0, 5)], KERNEL)


def test_monotonicity():
    ages = [(2.0, 5), (5.0, 5), (9.0, 5)]
    ps = [predict_window(ages[:i], KERNEL, mode=TWITTER) for i in range(1, 4)]
    assert ps == sorted(ps)
    assert predict_window([(1.0, 5)], KERNEL) >= predict_window([(4.0, 5)], KERNEL)
    g = SocialSignalCurve()
    assert all(predict_window([(1.0, 5)], KERNEL, g, DIGG, k=k) <= predict_window([(1.0, 5)], KERNEL, g, DIGG, k=k + 1) for k in range(1, 10))


def self_consistent_records(n, seed):
    rng = np.random.default_rng(seed)
    p = rng.beta(0.5, 3.0, n)
    y = rng.random(n) < p
    return [PredictionRecord(i, 0, 0.0, 0.5, ((1.0, 5),) * (1 + i % 3), 1 + i % 3, float(a), bool(b)) for i, (a, b) in enumerate(zip(p, y))]


def test_self_consistency():
    rec = self_consistent_records(50_000, 1)
    t = calibrate(rec, 10)
    assert t.n.sum() == 50_000
    assert t.coverage() >= 0.9
    assert np.all((t.obs_freq >= 0) & (t.obs_freq <= 1))
    by_k = calibrate(rec, 5, group_by_k=2)
    assert set(by_k.k_group) == {"1", "2+"} and by_k.n.sum() == 50_000


def test_constant_predictor():
    rec = [PredictionRecord(i, 0, 0.0, 0.5, ((1.0, 5),), 1, 0.5, bool(i % 2)) for i in range(200)]
    t = calibrate(rec, 10)
    assert len(t) == 1
    assert t.mean_pred[0] == pytest.approx(0.5) and t.obs_freq[0] == pytest.approx(0.5)


def test_record_csv_round_trip(tmp_path):
    rt = RecordTable.from_records(self_consistent_records(50, 2))
    p = tmp_path / "rec.csv"
    rt.to_csv(p, ["master_seed: 2"])
    back = RecordTable.from_csv(p)
    np.testing.assert_allclose(back.predicted, rt.predicted, rtol=1e-11)
    np.testing.assert_array_equal(back.observed, rt.observed)


@pytest.mark.parametrize("mode", [TWITTER, DIGG])
def test_records_from_feed_log(mode):
    g = attention.calibration_graph(n=400, seed=0)
    cfg = attention.calibration_config(mode)
    _, log = attention.simulate_feed_items(g, cfg, 20, master_seed=1)
    rec = records_from_log(log, cfg.response_kernel(), cfg.signal, mode, max_age=30.0)
    assert len(rec) > 0
    assert np.all((rec.predicted >= 0) & (rec.predicted <= 1))
    assert np.all(rec.n_exposures >= 1)
    # each infected pair contributes at most one observed window
    obs = rec.observed
    keys = rec.item[obs] * 10**6 + rec.user[obs]
    assert np.unique(keys).size == keys.size
    # forecasts roughly match outcomes in total
    assert abs(rec.predicted.sum() - obs.sum()) < 4 * np.sqrt(rec.predicted.sum()) + 5

"""Visibility-based forecasts of sharing and their calibration.

The per-window response to one exposure comes from integrating the kernel
over the window, ``h = 1 - exp(-integral f)``.  Twitter-style feeds combine
all exposures as independent chances; Digg-style feeds use the age of the
first exposure times the social-signal multiplier.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .attention import DIGG, TWITTER, SocialSignalCurve, VisibilityKernel
from .estimation import pair_table, wilson_interval
from .events import EXPOSURE, EventLog

RECORD_COLUMNS = ("user_id", "item_id", "window_start", "window", "n_exposures", "first_age", "friend_count", "signal_k", "predicted_p", "observed")
CALIBRATION_COLUMNS = ("bin_lo", "bin_hi", "mean_pred", "obs_freq", "n", "ci_lo", "ci_hi", "k_group")

DEFAULT_WINDOW = 0.5  # minutes
DEFAULT_STEP = 1.0


def window_response(age, n_f, kernel: VisibilityKernel, window: float = DEFAULT_WINDOW):
    """h(age): probability of responding within ``[age, age + window)``."""
    if window <= 0:
        raise ValueError("window must be positive")
    return -np.expm1(-kernel.integral(age, np.asarray(age, dtype=float) + window, n_f))


def predict_window(exposures, kernel: VisibilityKernel, signal: SocialSignalCurve | None = None, mode: str = TWITTER, window: float = DEFAULT_WINDOW, k: int | None = None) -> float:
    """Probability of sharing in the next ``window``.

    ``exposures`` is a sequence of ``(age, n_f)`` pairs at the window start.
    In Digg mode only the earliest exposure's age is used and ``k`` (default:
    number of exposures) drives the signal multiplier.
    """
    ex = np.asarray(exposures, dtype=float).reshape(-1, 2)
    if ex.shape[0] == 0:
        raise ValueError("at least one exposure is required")
    if np.any(ex[:, 0] < 0):
        raise ValueError("exposure ages must be non-negative")
    if mode == TWITTER:
        h = window_response(ex[:, 0], ex[:, 1], kernel, window)
        return float(1.0 - np.prod(1.0 - h))
    if mode == DIGG:
        i = int(np.argmax(ex[:, 0]))
        h = float(window_response(ex[i, 0], ex[i, 1], kernel, window))
        g = 1.0 if signal is None else float(signal(ex.shape[0] if k is None else k))
        return float(min(1.0, max(0.0, h * g)))
    raise ValueError(f"mode must be {TWITTER!r} or {DIGG!r}")


@dataclass
class PredictionRecord:
    user_id: int
    item_id: int
    window_start: float
    window: float
    exposures: tuple  # ((age, n_f), ...)
    signal_k: int
    predicted_p: float
    observed: bool

    def __post_init__(self):
        if not 0.0 <= self.predicted_p <= 1.0:
            raise ValueError("predicted_p must lie in [0, 1]")
        if self.window <= 0:
            raise ValueError("window must be positive")
        if not self.exposures:
            raise ValueError("exposures must be non-empty")


@dataclass
class RecordTable:
    """Columnar form of many prediction records."""

    user: np.ndarray
    item: np.ndarray
    window_start: np.ndarray
    window: float
    n_exposures: np.ndarray
    first_age: np.ndarray
    friend_count: np.ndarray
    signal_k: np.ndarray
    predicted: np.ndarray
    observed: np.ndarray

    def __len__(self):
        return int(self.predicted.size)

    @classmethod
    def from_records(cls, records) -> "RecordTable":
        records = list(records)
        if not records:
            raise ValueError("no records")
        ages = [max(a for a, _ in r.exposures) for r in records]
        return cls(
            np.array([r.user_id for r in records]),
            np.array([r.item_id for r in records]),
            np.array([r.window_start for r in records], float),
            float(records[0].window),
            np.array([len(r.exposures) for r in records]),
            np.array(ages, float),
            np.array([int(r.exposures[0][1]) for r in records]),
            np.array([r.signal_k for r in records]),
            np.array([r.predicted_p for r in records], float),
            np.array([r.observed for r in records], bool),
        )

    def to_csv(self, dest, header_lines=()) -> None:
        lines = [f"# {h}" for h in header_lines]
        lines.append(",".join(RECORD_COLUMNS))
        for row in zip(
            self.user.tolist(),
            self.item.tolist(),
            self.window_start.tolist(),
            self.n_exposures.tolist(),
            self.first_age.tolist(),
            self.friend_count.tolist(),
            self.signal_k.tolist(),
            self.predicted.tolist(),
            self.observed.tolist(),
        ):
            lines.append(f"{row[0]},{row[1]},{row[2]:.12g},{self.window:.12g},{row[3]},{row[4]:.12g},{row[5]},{row[6]},{row[7]:.12g},{int(row[8])}")
        _write(dest, "\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "RecordTable":
        with open(path, "r", encoding="utf-8") as fh:
            rows = list(csv.reader(ln for ln in fh if ln.strip() and not ln.startswith("#")))
        if not rows or tuple(rows[0]) != RECORD_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(RECORD_COLUMNS)}")
        body = rows[1:]
        if not body:
            raise ValueError(f"{path}: no records")
        col = list(zip(*body))
        window = float(col[3][0])
        return cls(
            np.array(col[0], np.int64),
            np.array(col[1], np.int64),
            np.array(col[2], float),
            window,
            np.array(col[4], np.int64),
            np.array(col[5], float),
            np.array(col[6], np.int64),
            np.array(col[7], np.int64),
            np.array(col[8], float),
            np.array(col[9], np.int64).astype(bool),
        )


def _write(dest, text):
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


def records_from_log(
    log: EventLog,
    kernel: VisibilityKernel,
    signal: SocialSignalCurve | None = None,
    mode: str = TWITTER,
    window: float = DEFAULT_WINDOW,
    step: float = DEFAULT_STEP,
    horizon: float | None = None,
    max_age: float | None = None,
    drop_interrupted: bool = True,
) -> RecordTable:
    """Score every exposed (user, item) pair on a regular grid of windows.

    Windows start at the first exposure and every ``step`` after it, while
    the pair has not yet shared, the window fits before ``horizon`` and the
    first exposure is at most ``max_age`` old.  ``observed`` marks the window
    in which the share happened.  A forecast made at the window start
    cannot see exposures arriving inside the window; with
    ``drop_interrupted`` such windows are left out.
    """
    if step <= 0 or window <= 0:
        raise ValueError("step and window must be positive")
    pt = pair_table(log)
    end_all = float(log.time.max()) if horizon is None else float(horizon)
    ex = log.of_kind(EXPOSURE)
    base = int(max(log.user.max(), 0)) + 1
    ekey = ex.item * base + ex.user
    o = np.lexsort((ex.time, ekey))
    ekey, etime = ekey[o], ex.time[o]
    pkey = pt.item * base + pt.user
    lo = np.searchsorted(ekey, pkey, "left")
    hi = np.searchsorted(ekey, pkey, "right")

    cols = {name: [] for name in ("user", "item", "start", "n", "age", "nf", "k", "p", "obs")}
    for j in range(pkey.size):
        t0 = pt.first_exposure[j]
        last = end_all - window
        if pt.infected[j]:
            last = min(last, pt.infect_time[j])
        if max_age is not None:
            last = min(last, t0 + max_age)
        if last < t0:
            continue
        starts = t0 + step * np.arange(int(np.floor((last - t0) / step + 1e-9)) + 1)
        times = etime[lo[j] : hi[j]]
        nf = pt.friend_count[j]
        # exposures already delivered at each window start
        count = np.searchsorted(times, starts, "right")
        if mode == TWITTER:
            ages = starts[:, None] - times[None, :]
            live = ages >= 0
            lam = np.where(live, kernel.integral(np.where(live, ages, 0.0), np.where(live, ages, 0.0) + window, nf), 0.0)
            p = -np.expm1(-lam.sum(axis=1))
        else:
            h = window_response(starts - t0, nf, kernel, window)
            g = np.ones_like(h) if signal is None else signal(count)
            p = np.clip(h * g, 0.0, 1.0)
        obs = np.zeros(starts.size, bool)
        if pt.infected[j]:
            ti = pt.infect_time[j]
            obs = (starts <= ti) & (ti < starts + window)
        if drop_interrupted:
            keep = np.searchsorted(times, starts + window, "left") == count
            starts, count, p, obs = starts[keep], count[keep], p[keep], obs[keep]
        cols["user"].append(np.full(starts.size, pt.user[j]))
        cols["item"].append(np.full(starts.size, pt.item[j]))
        cols["start"].append(starts)
        cols["n"].append(count)
        cols["age"].append(starts - t0)
        cols["nf"].append(np.full(starts.size, nf))
        cols["k"].append(count)
        cols["p"].append(p)
        cols["obs"].append(obs)
    if not cols["p"]:
        raise ValueError("no scoreable windows in the log")
    cat = {k: np.concatenate(v) for k, v in cols.items()}
    return RecordTable(cat["user"], cat["item"], cat["start"], float(window), cat["n"], cat["age"], cat["nf"], cat["k"], cat["p"], cat["obs"])


@dataclass
class CalibrationTable:
    bin_lo: np.ndarray
    bin_hi: np.ndarray
    mean_pred: np.ndarray
    obs_freq: np.ndarray
    n: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    k_group: np.ndarray

    def __len__(self):
        return int(self.n.size)

    def covered(self, min_count: int = 1) -> np.ndarray:
        """Bins (with at least ``min_count`` records) whose CI contains y = x."""
        m = self.n >= min_count
        return m & (self.ci_lo <= self.mean_pred) & (self.mean_pred <= self.ci_hi)

    def coverage(self, min_count: int = 1) -> float:
        m = self.n >= min_count
        if not m.any():
            return float("nan")
        return float(self.covered(min_count)[m].mean())

    def to_csv(self, dest, header_lines=()) -> None:
        lines = [f"# {h}" for h in header_lines]
        lines.append(",".join(CALIBRATION_COLUMNS))
        for i in range(len(self)):
            lines.append(
                f"{self.bin_lo[i]:.12g},{self.bin_hi[i]:.12g},{self.mean_pred[i]:.12g},{self.obs_freq[i]:.12g},"
                f"{self.n[i]},{self.ci_lo[i]:.12g},{self.ci_hi[i]:.12g},{self.k_group[i]}"
            )
        _write(dest, "\n".join(lines) + "\n")


def _bin_edges(p, bins, method):
    if method == "quantile":
        edges = np.unique(np.quantile(p, np.linspace(0, 1, bins + 1)))
    elif method == "uniform":
        edges = np.linspace(0.0, 1.0, bins + 1)
    else:
        raise ValueError("method must be 'quantile' or 'uniform'")
    return edges


def _calibrate_group(p, y, bins, method, label):
    edges = _bin_edges(p, bins, method)
    if edges.size == 1:
        idx = np.zeros(p.size, np.int64)
        edges = np.array([edges[0], edges[0]])
    else:
        idx = np.clip(np.searchsorted(edges, p, "right") - 1, 0, edges.size - 2)
    nb = edges.size - 1
    n = np.bincount(idx, minlength=nb)
    sp = np.bincount(idx, weights=p, minlength=nb)
    sy = np.bincount(idx, weights=y, minlength=nb)
    keep = n > 0
    n, sp, sy = n[keep], sp[keep], sy[keep]
    lo, hi = wilson_interval(sy, n)
    return edges[:-1][keep], edges[1:][keep], sp / n, sy / n, n, lo, hi, np.full(n.size, label, dtype=object)


def calibrate(records, bins: int = 10, method: str = "quantile", group_by_k: int | None = None) -> CalibrationTable:
    """Bin records by predicted probability and compare with observed frequency.

    ``group_by_k`` (say 4) splits records into exposure-count groups
    ``1, 2, ..., 4+``, each binned separately.
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    rt = records if isinstance(records, RecordTable) else RecordTable.from_records(records)
    if len(rt) == 0:
        raise ValueError("no records")
    p = rt.predicted
    y = rt.observed.astype(float)
    if group_by_k is None:
        parts = [_calibrate_group(p, y, bins, method, "all")]
    else:
        g = np.minimum(rt.n_exposures, group_by_k)
        parts = []
        for k in np.unique(g):
            m = g == k
            label = f"{k}+" if k == group_by_k else str(k)
            parts.append(_calibrate_group(p[m], y[m], bins, method, label))
    cols = [np.concatenate(c) for c in zip(*parts)]
    return CalibrationTable(*cols)

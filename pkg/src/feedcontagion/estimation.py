"""Observational response estimators over event logs.

* :func:`exposure_response`: probability of infection given ``k`` distinct
  infected friends exposed the user to the item.
* :func:`time_response`: response by exposure age for single-exposure pairs,
  on base-2 logarithmic bins.
* :func:`aggregate_mixture`: trial-weighted pooling of curves.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np
from scipy import optimize, stats

from .events import EXPOSURE, INFECTION, EventLog

RESPONSE_COLUMNS = ("bin_lo", "bin_hi", "trials", "successes", "p", "ci_lo", "ci_hi", "stratum", "odds", "rate")

FINAL, AT_INFECTION = "final", "at_infection"


class EstimationError(ValueError):
    pass


def wilson_interval(successes, trials, level: float = 0.95):
    s = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    z = NormalDist().inv_cdf(0.5 + level / 2)
    p = s / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = np.where(s == 0, 0.0, np.clip(centre - half, 0, 1))
    hi = np.where(s == n, 1.0, np.clip(centre + half, 0, 1))
    return lo, hi


def poisson_rate_interval(events, exposure, level: float = 0.95):
    """Exact (Garwood) interval for ``events / exposure``."""
    x = np.asarray(events, dtype=float)
    t = np.asarray(exposure, dtype=float)
    a = (1 - level) / 2
    lo = np.where(x > 0, stats.chi2.ppf(a, 2 * x) / 2, 0.0)
    hi = stats.chi2.ppf(1 - a, 2 * x + 2) / 2
    return lo / t, hi / t


@dataclass
class ResponseFunction:
    """Binned response curve; ``kind`` is ``"k"`` (exposure count) or ``"age"``.

    Bins are half-open ``[bin_lo, bin_hi)``.  For ``age`` curves ``trials``
    counts pairs still at risk when the bin opens and ``rate`` is events per
    unit of at-risk time.
    """

    bin_lo: np.ndarray
    bin_hi: np.ndarray
    trials: np.ndarray
    successes: np.ndarray
    stratum: str = "all"
    kind: str = "k"
    at_risk: np.ndarray | None = None
    p: np.ndarray = field(init=False)
    ci_lo: np.ndarray = field(init=False)
    ci_hi: np.ndarray = field(init=False)

    def __post_init__(self):
        self.bin_lo = np.asarray(self.bin_lo, dtype=float)
        self.bin_hi = np.asarray(self.bin_hi, dtype=float)
        self.trials = np.asarray(self.trials, dtype=np.int64)
        self.successes = np.asarray(self.successes, dtype=np.int64)
        if np.any(self.trials <= 0):
            raise EstimationError("reported bins need trials > 0")
        if np.any(self.successes > self.trials) or np.any(self.successes < 0):
            raise EstimationError("successes must lie in [0, trials]")
        self.p = self.successes / self.trials
        self.ci_lo, self.ci_hi = wilson_interval(self.successes, self.trials)

    def __len__(self):
        return int(self.trials.size)

    @property
    def odds(self) -> np.ndarray:
        """Infected-to-not-infected ratio per bin."""
        with np.errstate(divide="ignore"):
            return self.successes / (self.trials - self.successes)

    @property
    def rate(self) -> np.ndarray:
        if self.at_risk is None:
            raise EstimationError("rate is only defined for age curves")
        return self.successes / self.at_risk

    def rate_interval(self, level: float = 0.95):
        return poisson_rate_interval(self.successes, self.at_risk, level)

    def at(self, lo) -> int:
        """Index of the bin starting at ``lo`` (-1 if absent)."""
        i = np.flatnonzero(self.bin_lo == lo)
        return int(i[0]) if i.size else -1

    def rows(self):
        for i in range(len(self)):
            yield (self.bin_lo[i], self.bin_hi[i], int(self.trials[i]), int(self.successes[i]), self.p[i], self.ci_lo[i], self.ci_hi[i], self.stratum)


def write_response_csv(curves, dest, header_lines=()) -> None:
    lines = [f"# {h}" for h in header_lines]
    lines.append(",".join(RESPONSE_COLUMNS))
    for c in curves:
        odds = c.odds
        rate = c.rate if c.at_risk is not None else None
        for i, (lo, hi, n, s, p, a, b, name) in enumerate(c.rows()):
            r = "" if rate is None else f"{rate[i]:.12g}"
            lines.append(f"{lo:.12g},{hi:.12g},{n},{s},{p:.12g},{a:.12g},{b:.12g},{name},{odds[i]:.12g},{r}")
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


# --------------------------------------------------------------------------
# strata


@dataclass(frozen=True)
class Stratum:
    """Friend-count range ``[lo, hi)``."""

    name: str
    lo: float = 0
    hi: float = np.inf

    def contains(self, n_f):
        n_f = np.asarray(n_f)
        return (n_f >= self.lo) & (n_f < self.hi)


DEFAULT_STRATA = (Stratum("lt10", 0, 10), Stratum("gt250", 251, np.inf))


def parse_strata(spec: str) -> tuple:
    """``"lt10:0-10,gt250:251-inf"`` -> strata."""
    out = []
    for part in spec.split(","):
        name, _, rng = part.strip().partition(":")
        lo, _, hi = rng.partition("-")
        if not name or not lo or not hi:
            raise ValueError(f"bad stratum spec {part!r}; expected name:lo-hi")
        out.append(Stratum(name, float(lo), float(hi)))
    return tuple(out)


# --------------------------------------------------------------------------
# per-pair summaries


@dataclass
class PairTable:
    """One row per (item, user) pair that received at least one exposure."""

    item: np.ndarray
    user: np.ndarray
    friend_count: np.ndarray
    first_exposure: np.ndarray
    second_exposure: np.ndarray  # inf if only one exposure
    infected: np.ndarray
    infect_time: np.ndarray  # nan if not infected
    k_final: np.ndarray
    k_at_infection: np.ndarray  # k at infection for infected pairs, else k_final


def _pair_keys(item, user, base):
    return item * base + user


def pair_table(log: EventLog) -> PairTable:
    """Summarize exposures per (item, user); seeds infected before any exposure are dropped."""
    if len(log) == 0:
        raise EstimationError("event log is empty")
    ex = log.of_kind(EXPOSURE)
    inf = log.of_kind(INFECTION)
    if len(ex) == 0:
        raise EstimationError("event log has no exposures")
    base = int(max(log.user.max(), 0)) + 1
    ekey = _pair_keys(ex.item, ex.user, base)
    ikey = _pair_keys(inf.item, inf.user, base)

    # first infection per pair
    o = np.lexsort((inf.time, ikey))
    ikey, itime = ikey[o], inf.time[o]
    first = np.ones(ikey.size, bool)
    first[1:] = ikey[1:] != ikey[:-1]
    ikey, itime = ikey[first], itime[first]

    # exposures sorted by pair then time
    o = np.lexsort((ex.time, ekey))
    ekey, etime, efriend, enf = ekey[o], ex.time[o], ex.friend[o], ex.friend_count[o]
    pairs, start, counts = np.unique(ekey, return_index=True, return_counts=True)
    first_t = etime[start]
    second_t = np.where(counts > 1, etime[np.minimum(start + 1, etime.size - 1)], np.inf)
    nf = enf[start]

    pos = np.searchsorted(ikey, pairs)
    pos_c = np.minimum(pos, max(ikey.size - 1, 0))
    has_inf = (ikey.size > 0) & (ikey[pos_c] == pairs) if ikey.size else np.zeros(pairs.size, bool)
    t_inf = np.where(has_inf, itime[pos_c] if ikey.size else 0.0, np.nan)

    # distinct exposing friends; missing friend ids count each exposure
    pair_idx = np.repeat(np.arange(pairs.size), counts)
    anon = efriend < 0
    fid = np.where(anon, -1 - np.arange(efriend.size), efriend)
    _, uniq = np.unique(np.stack([pair_idx, fid]), axis=1, return_index=True)
    distinct = np.zeros(efriend.size, bool)
    distinct[uniq] = True
    k_final = np.bincount(pair_idx, weights=distinct, minlength=pairs.size).astype(np.int64)
    # a friend counts toward k at infection if its first exposure came no later than the infection
    before = distinct & (etime <= np.nan_to_num(t_inf, nan=np.inf)[pair_idx])
    k_inf = np.bincount(pair_idx, weights=before, minlength=pairs.size).astype(np.int64)
    k_inf = np.where(has_inf, k_inf, k_final)

    keep = ~(has_inf & (t_inf < first_t))
    return PairTable(
        item=(pairs // base)[keep],
        user=(pairs % base)[keep],
        friend_count=nf[keep],
        first_exposure=first_t[keep],
        second_exposure=second_t[keep],
        infected=has_inf[keep],
        infect_time=t_inf[keep],
        k_final=k_final[keep],
        k_at_infection=k_inf[keep],
    )


def _k_curve(k, success, name, max_k=None) -> ResponseFunction:
    if k.size == 0:
        raise EstimationError(f"stratum {name!r} has no decision pairs")
    if max_k is not None:
        m = k <= max_k
        k, success = k[m], success[m]
    trials = np.bincount(k)
    hits = np.bincount(k, weights=success, minlength=trials.size).astype(np.int64)
    ks = np.flatnonzero(trials > 0)
    ks = ks[ks > 0]
    if ks.size == 0:
        raise EstimationError(f"stratum {name!r} has no decision pairs")
    return ResponseFunction(ks, ks + 1, trials[ks], hits[ks], name, "k")


def exposure_response(log: EventLog, strata=None, convention: str = FINAL, max_k: int | None = None, pairs: PairTable | None = None):
    """Per-k response probability, pooled or per stratum.

    ``convention`` picks when ``k`` is counted for infected pairs:
    ``"final"`` counts every distinct infected friend that exposed the user
    (for non-infected pairs both conventions use the end of the window);
    ``"at_infection"`` counts only friends whose exposure arrived by the
    moment of infection.

    Returns a single curve when ``strata`` is None, otherwise a dict keyed by
    stratum name; strata without decision pairs are omitted.
    """
    if convention not in (FINAL, AT_INFECTION):
        raise ValueError(f"convention must be {FINAL!r} or {AT_INFECTION!r}")
    pt = pair_table(log) if pairs is None else pairs
    k = pt.k_final if convention == FINAL else pt.k_at_infection
    if strata is None:
        return _k_curve(k, pt.infected, "all", max_k)
    out = {}
    for st in strata:
        m = st.contains(pt.friend_count)
        if m.any():
            out[st.name] = _k_curve(k[m], pt.infected[m], st.name, max_k)
    return out


def log2_bins(base: float, top: float) -> np.ndarray:
    """Edges 0, base, 2 base, 4 base, ... up to at least ``top``."""
    if base <= 0:
        raise ValueError("base bin width must be positive")
    edges = [0.0, base]
    while edges[-1] < top:
        edges.append(edges[-1] * 2)
    return np.asarray(edges)


def _age_curve(age_end, event, edges, name) -> ResponseFunction:
    lo, hi = edges[:-1], edges[1:]
    # at-risk time of every pair inside every bin
    overlap = np.clip(age_end[:, None], lo, hi) - lo
    at_risk = overlap.sum(axis=0)
    entered = (age_end[:, None] > lo).sum(axis=0)
    ev_age = age_end[event]
    hits = np.histogram(ev_age, bins=edges)[0]
    keep = entered > 0
    if not keep.any():
        raise EstimationError(f"stratum {name!r} has no eligible pairs")
    return ResponseFunction(lo[keep], hi[keep], entered[keep], hits[keep], name, "age", at_risk[keep])


def time_response(log: EventLog, strata=None, base: float = 1.0, horizon: float | None = None, pairs: PairTable | None = None):
    """Response by age of the first exposure, single-exposure pairs only.

    A pair is followed from its first exposure until it responds, receives a
    second exposure, or the observation ends (``horizon``, default the last
    log time).  Pairs whose second exposure preceded any response are
    censored there, so every counted response followed exactly one exposure.
    """
    pt = pair_table(log) if pairs is None else pairs
    end = float(log.time.max()) if horizon is None else float(horizon)
    stop = np.minimum(pt.second_exposure, end)
    responded = pt.infected & (pt.infect_time < stop)
    age_end = np.where(responded, pt.infect_time, stop) - pt.first_exposure
    ok = age_end >= 0
    age_end, responded, nf = age_end[ok], responded[ok], pt.friend_count[ok]
    if age_end.size == 0:
        raise EstimationError("no eligible single-exposure pairs")
    edges = log2_bins(base, max(float(age_end.max()), base) * (1 + 1e-12))
    if strata is None:
        return _age_curve(age_end, responded, edges, "all")
    out = {}
    for st in strata:
        m = st.contains(nf)
        if m.any():
            out[st.name] = _age_curve(age_end[m], responded[m], edges, st.name)
    return out


def half_life(curve: ResponseFunction) -> float:
    """Age at which the response rate first falls to half its first-bin value.

    Interpolates linearly in log-age between geometric bin centres; returns
    inf if the rate never halves.
    """
    r = curve.rate
    if r.size == 0 or r[0] <= 0:
        return float("nan")
    lo = np.maximum(curve.bin_lo, curve.bin_hi / 4)  # first bin [0, b) -> centre b/2
    centre = np.sqrt(lo * curve.bin_hi)
    target = r[0] / 2
    below = np.flatnonzero(r <= target)
    if below.size == 0:
        return float("inf")
    j = int(below[0])
    if j == 0:
        return float(centre[0])
    x0, x1 = np.log(centre[j - 1]), np.log(centre[j])
    y0, y1 = r[j - 1], r[j]
    frac = (y0 - target) / (y0 - y1) if y0 != y1 else 0.0
    return float(np.exp(x0 + frac * (x1 - x0)))


def aggregate_mixture(curves) -> ResponseFunction:
    """Trial-weighted pooling; a bin missing from a curve contributes no trials."""
    curves = list(curves)
    if not curves:
        raise EstimationError("no curves to pool")
    kinds = {c.kind for c in curves}
    if len(kinds) != 1:
        raise EstimationError("cannot pool curves of different kinds")
    bins = {}
    for c in curves:
        for lo, hi, n, s in zip(c.bin_lo, c.bin_hi, c.trials, c.successes):
            if lo in bins and bins[lo][0] != hi:
                raise EstimationError(f"bin mismatch at {lo}: [{lo}, {bins[lo][0]}) vs [{lo}, {hi})")
            prev = bins.get(lo, (hi, 0, 0))
            bins[lo] = (hi, prev[1] + int(n), prev[2] + int(s))
    lo = np.array(sorted(bins))
    hi = np.array([bins[x][0] for x in lo])
    if np.any(hi[:-1] > lo[1:]):
        raise EstimationError("bins overlap")
    name = "+".join(c.stratum for c in curves) if len(curves) > 1 else curves[0].stratum
    at_risk = None
    if all(c.at_risk is not None for c in curves):
        at_risk = np.zeros(lo.size)
        for c in curves:
            at_risk[np.searchsorted(lo, c.bin_lo)] += c.at_risk
    return ResponseFunction(lo, hi, [bins[x][1] for x in lo], [bins[x][2] for x in lo], name, kinds.pop(), at_risk)


def fit_icm_mu(curve: ResponseFunction, max_k: int | None = None) -> float:
    """Least-squares fit of ``1 - (1 - mu)^k`` to a k-curve, weighted by trials."""
    if curve.kind != "k":
        raise EstimationError("need an exposure-count curve")
    k = curve.bin_lo
    m = np.ones(k.size, bool) if max_k is None else k <= max_k
    k, p, w = k[m], curve.p[m], curve.trials[m].astype(float)
    if k.size == 0:
        raise EstimationError("no bins to fit")
    res = optimize.minimize_scalar(lambda mu: float(np.sum(w * (p - (1 - (1 - mu) ** k)) ** 2)), bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def is_monotone_within_ci(curve: ResponseFunction, increasing: bool = True, use_rate: bool = False) -> bool:
    """No later bin lies significantly below (above) an earlier one.

    A violation needs non-overlapping intervals, compared against the running
    extreme so far.
    """
    if use_rate:
        lo, hi = curve.rate_interval()
    else:
        lo, hi = curve.ci_lo, curve.ci_hi
    if increasing:
        best_lo = -np.inf
        for i in range(len(curve)):
            if hi[i] < best_lo:
                return False
            best_lo = max(best_lo, lo[i])
    else:
        best_hi = np.inf
        for i in range(len(curve)):
            if lo[i] > best_hi:
                return False
            best_hi = min(best_hi, hi[i])
    return True

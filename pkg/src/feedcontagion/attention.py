"""Limited-attention feed simulation.

Every user keeps a reverse-chronological feed.  Anonymous clutter arrives at
the user's incoming message rate (friends x per-friend posting rate) and
pushes older items down.  Users hold sessions as a Poisson process; a session
inspects ``budget`` feed positions drawn without replacement with probability
proportional to the position-bias weight.  An inspected copy of the tracked
item, ``dt`` after it arrived, is noticed with probability ``kernel(dt, n_f)``
and a noticed item is shared with probability ``share_prob`` (times the
social-signal multiplier ``g(k)`` in Digg mode).

Twitter mode inserts a fresh copy at the top of the feed on every delivery;
Digg mode keeps a single entry at its original place and increments its
recommendation counter ``k``.

Only sessions that could touch the tracked item matter, so the loop draws
them by thinning: a copy at position ``P`` is noticed at rate
``session_rate * incl(P) * kernel(dt, n_f)`` where ``incl`` is the per-session
inclusion probability of a position, and each user's next candidate comes
from an upper bound on that rate.  The bound holds until the next delivery
because the kernel never increases with age.
"""
from __future__ import annotations

import functools
import heapq
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .cascade import OutbreakResult, run_rng
from .events import EXPOSURE, INFECTION, SESSION, EventLog, EventLogBuilder
from .graph import DirectedGraph

TWITTER, DIGG = "twitter", "digg"


# --------------------------------------------------------------------------
# visibility kernel


@dataclass(frozen=True)
class VisibilityKernel:
    """Discoverability of an item ``dt`` after it reached a user with ``n_f`` friends.

    ``power``:        p0 * (1 + dt / tau) ** -alpha
    ``exponential``:  p0 * exp(-dt / tau)

    with ``tau = c / max(rate_floor, rate_per_friend * n_f)``, so the item is
    buried faster in busier feeds.
    """

    p0: float = 1.0
    alpha: float = 2.0
    c: float = 60.0
    rate_per_friend: float = 0.1
    rate_floor: float = 1.0
    form: str = "power"

    def __post_init__(self):
        if not 0.0 < self.p0 <= 1.0:
            raise ValueError("p0 must lie in (0, 1]")
        if self.alpha < 0 or self.c <= 0 or self.rate_per_friend < 0 or self.rate_floor <= 0:
            raise ValueError("alpha >= 0, c > 0, rate_per_friend >= 0, rate_floor > 0 required")
        if self.form not in ("power", "exponential"):
            raise ValueError(f"unknown kernel form {self.form!r}")

    def tau(self, n_f):
        return self.c / np.maximum(self.rate_floor, self.rate_per_friend * np.asarray(n_f, dtype=float))

    def __call__(self, dt, n_f):
        dt = np.asarray(dt, dtype=float)
        tau = self.tau(n_f)
        if self.form == "power":
            return self.p0 * (1.0 + dt / tau) ** -self.alpha
        return self.p0 * np.exp(-dt / tau)

    def integral(self, a, b, n_f):
        """Integral of the kernel over ages [a, b]."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        tau = self.tau(n_f)
        if self.form == "exponential":
            return self.p0 * tau * (np.exp(-a / tau) - np.exp(-b / tau))
        if abs(self.alpha - 1.0) < 1e-12:
            return self.p0 * tau * np.log((1.0 + b / tau) / (1.0 + a / tau))
        e = 1.0 - self.alpha
        return self.p0 * tau / e * ((1.0 + b / tau) ** e - (1.0 + a / tau) ** e)

    def scaled(self, factor: float) -> "VisibilityKernel":
        return VisibilityKernel(self.p0 * factor, self.alpha, self.c, self.rate_per_friend, self.rate_floor, self.form)


# --------------------------------------------------------------------------
# position bias


@dataclass(frozen=True)
class PositionBias:
    """Attention weight per list position (0 = top).

    ``tail`` is the weight used beyond the end of the table; 0 means items
    pushed past the table are never seen.
    """

    weights: tuple
    tail: float = 0.0
    uptick: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w <= 0):
            raise ValueError("weights must be a non-empty vector of positive numbers")
        if self.tail < 0:
            raise ValueError("tail must be non-negative")
        object.__setattr__(self, "weights", tuple(w.tolist()))

    @classmethod
    def default(cls, length: int = 100, scale: float = 15.0, exponent: float = 1.0, uptick: bool = False, reverse_share: float = 0.1):
        """Power-law decay from the top; ``uptick`` adds readers who start from the end."""
        p = np.arange(length, dtype=float)
        w = (1.0 + p / scale) ** -exponent
        if uptick:
            w = (1.0 - reverse_share) * w + reverse_share * w[::-1]
        return cls(tuple(w), 0.0, uptick)

    @classmethod
    def uniform(cls, length: int = 100):
        return cls(tuple(np.ones(length)), 1.0, False)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.weights)

    def weight(self, positions):
        w = self.array
        p = np.asarray(positions)
        return np.where(p < w.size, w[np.minimum(p, w.size - 1)], self.tail)

    def relative(self, positions):
        """Weight relative to the table mean (1.0 = uniform expectation)."""
        return self.weight(positions) / self.array.mean()

    @property
    def max_relative(self) -> float:
        return float(max(self.array.max(), self.tail) / self.array.mean())

    def top_to_middle_ratio(self) -> float:
        """Mean weight of positions 1-5 over positions 50-75 (1-based)."""
        w = self.array
        return float(w[0:5].mean() / w[49:75].mean())


def measure_position_attention(bias: PositionBias, list_length: int = 100, trials: int = 100_000, master_seed: int = 0, budget: int = 5, chunk: int = 10_000) -> np.ndarray:
    """Relative attention per position from simulated list inspections.

    Each trial picks ``budget`` positions without replacement with
    probability proportional to the bias weight.  Counts are divided by the
    count expected under uniform attention, so 1.0 means "as expected".
    """
    if trials < 1 or budget < 1 or list_length < budget:
        raise ValueError("need trials >= 1 and 1 <= budget <= list_length")
    w = bias.weight(np.arange(list_length)).astype(float)
    if np.count_nonzero(w) < budget:
        raise ValueError("fewer visible positions than the inspection budget")
    w = np.where(w > 0, w, 1e-300)
    rng = np.random.default_rng(master_seed)
    counts = np.zeros(list_length, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        u = rng.random((b, list_length))
        u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
        counts += kernels.weighted_topk_counts(w, u, budget)
        done += b
    expected = trials * budget / list_length
    return counts / expected


def attention_ratio(rel: np.ndarray) -> float:
    """Top (1-5) over middle (50-75) attention, 1-based positions."""
    return float(rel[0:5].mean() / rel[49:75].mean())


INCLUSION_TRIALS = 20_000


@functools.lru_cache(maxsize=32)
def inclusion_probabilities(bias: PositionBias, budget: int) -> tuple:
    """Per-session probability that each table position is inspected.

    Returns ``(incl, tail)``; ``tail`` applies beyond the table.  Uniform
    tables are exact; others use a fixed-seed sampling estimate.
    """
    w = bias.array
    L = w.size
    if budget > L:
        raise ValueError("budget exceeds the bias table length")
    if np.all(w == w[0]):
        incl = np.full(L, budget / L)
    else:
        incl = measure_position_attention(bias, L, INCLUSION_TRIALS, 0, budget) * budget / L
    tail = budget / L * bias.tail / w.mean()
    incl.setflags(write=False)
    return incl, float(tail)


# --------------------------------------------------------------------------
# social signal


@dataclass(frozen=True)
class SocialSignalCurve:
    """Multiplier g(k) on the share probability when k friends recommended the item.

    Either ``1 + beta * log(k)`` or an explicit table ``g(1), g(2), ...``
    (held flat beyond its end).
    """

    beta: float = 0.5
    table: tuple | None = None

    def __post_init__(self):
        if self.table is not None:
            t = np.asarray(self.table, dtype=float)
            if t.size == 0 or abs(t[0] - 1.0) > 1e-12 or np.any(np.diff(t) < 0) or np.any(t <= 0):
                raise ValueError("signal table must start at 1 and be non-decreasing")
            object.__setattr__(self, "table", tuple(t.tolist()))
        elif self.beta < 0:
            raise ValueError("beta must be non-negative")

    @classmethod
    def none(cls):
        return cls(beta=0.0)

    def __call__(self, k):
        k = np.maximum(np.asarray(k, dtype=float), 1.0)
        if self.table is not None:
            t = np.asarray(self.table)
            return t[np.minimum(k.astype(np.int64), t.size) - 1]
        return 1.0 + self.beta * np.log(k)


# --------------------------------------------------------------------------
# configuration


@dataclass
class FeedConfig:
    kernel: VisibilityKernel = field(default_factory=VisibilityKernel)
    bias: PositionBias = field(default_factory=PositionBias.default)
    signal: SocialSignalCurve = field(default_factory=SocialSignalCurve)
    mode: str = TWITTER
    share_prob: float = 0.1
    session_rate: float = 0.05
    budget: int = 5
    horizon: float = 1440.0
    # per-friend clutter posting rate; None means kernel.rate_per_friend
    clutter_rate_per_friend: float | None = None

    def __post_init__(self):
        if self.mode not in (TWITTER, DIGG):
            raise ValueError(f"mode must be {TWITTER!r} or {DIGG!r}")
        if not 0.0 <= self.share_prob <= 1.0:
            raise ValueError("share_prob must lie in [0, 1]")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.session_rate < 0:
            raise ValueError("session_rate must be non-negative")
        if self.budget < 1 or self.budget > len(self.bias.weights):
            raise ValueError("budget must lie in [1, bias table length]")

    @property
    def clutter_rate(self) -> float:
        return self.kernel.rate_per_friend if self.clutter_rate_per_friend is None else self.clutter_rate_per_friend

    def response_kernel(self) -> VisibilityKernel:
        """Kernel of the per-copy share hazard, i.e. what a forecaster should use.

        Uses the mean per-session inclusion probability, which is exact when
        the position bias is uniform; otherwise the bias adds a position
        factor this kernel does not see.
        """
        return self.kernel.scaled(self.session_rate * self.share_prob * self.budget / len(self.bias.weights))

    # -- nested key-value form -------------------------------------------

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "share_prob": self.share_prob,
            "session_rate": self.session_rate,
            "budget": self.budget,
            "horizon": self.horizon,
            "clutter_rate_per_friend": self.clutter_rate_per_friend,
            "kernel": asdict(self.kernel),
            "bias": {"weights": list(self.bias.weights), "tail": self.bias.tail, "uptick": self.bias.uptick},
            "signal": {"beta": self.signal.beta, "table": None if self.signal.table is None else list(self.signal.table)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeedConfig":
        d = dict(d)
        kernel = VisibilityKernel(**d.pop("kernel", {}))
        b = d.pop("bias", {}) or {}
        kind = b.get("kind")
        if "weights" in b:
            bias = PositionBias(tuple(b["weights"]), b.get("tail", 0.0), b.get("uptick", False))
        elif kind == "uniform":
            bias = PositionBias.uniform(b.get("length", 100))
        else:
            bias = PositionBias.default(
                length=b.get("length", 100),
                scale=b.get("scale", 15.0),
                exponent=b.get("exponent", 1.0),
                uptick=b.get("uptick", False),
            )
        s = d.pop("signal", {}) or {}
        signal = SocialSignalCurve(beta=s.get("beta", 0.5), table=tuple(s["table"]) if s.get("table") else None)
        known = {"mode", "share_prob", "session_rate", "budget", "horizon", "clutter_rate_per_friend"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown feed config keys: {sorted(unknown)}")
        return cls(kernel=kernel, bias=bias, signal=signal, **d)

    @classmethod
    def from_json(cls, path) -> "FeedConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# simulation


class _User:
    __slots__ = ("arrivals", "clutter_at", "sources", "clutter", "clutter_t", "k", "state", "version", "dead")

    def __init__(self):
        self.arrivals = []  # arrival time of each tagged copy, oldest first
        self.clutter_at = []  # clutter count when each copy arrived
        self.sources = []  # friend that delivered each copy
        self.dead = []  # copy can no longer be seen
        self.clutter = 0
        self.clutter_t = 0.0
        self.k = 0
        self.state = 0  # 0 susceptible, 1 shared
        self.version = 0


def simulate_feed_diffusion(
    g: DirectedGraph,
    cfg: FeedConfig,
    seeds: Sequence[int],
    master_seed=0,
    item_id: int = 0,
    friend_counts=None,
    clutter_rates=None,
):
    """Spread one tracked item through limited-attention feeds.

    Returns ``(OutbreakResult, EventLog)``.  The result's ``infect_time`` holds
    the share generation (seeds 0); ``share_time`` holds continuous share
    times.  ``clutter_rates`` optionally gives each user's incoming clutter
    rate directly.
    """
    seeds = np.unique(np.asarray(seeds, dtype=np.int64))
    if seeds.size == 0 or seeds.min() < 0 or seeds.max() >= g.node_count:
        raise ValueError("seeds must be valid node ids")
    rng = master_seed if isinstance(master_seed, np.random.Generator) else np.random.default_rng(master_seed)
    n = g.node_count
    nf = g.out_degree() if friend_counts is None else np.asarray(friend_counts)
    lam = cfg.clutter_rate * nf.astype(float) if clutter_rates is None else np.asarray(clutter_rates, dtype=float)
    tau = cfg.kernel.tau(nf)
    p0, alpha, form = cfg.kernel.p0, cfg.kernel.alpha, cfg.kernel.form
    s_rate = cfg.session_rate
    incl_arr, tail_incl = inclusion_probabilities(cfg.bias, cfg.budget)
    incl = incl_arr.tolist()
    L = len(incl)
    r_max = max(float(incl_arr.max()), tail_incl)
    twitter = cfg.mode == TWITTER
    share_prob = cfg.share_prob
    horizon = cfg.horizon
    fptr = g.followers_ptr
    fidx = g.followers_idx

    users = {}
    log = EventLogBuilder()
    heap = []
    seq = 0
    gen = np.full(n, -1, dtype=np.int64)
    share_t = np.full(n, np.nan)

    def vis(age, v):
        if form == "power":
            return p0 * (1.0 + age / tau[v]) ** -alpha
        return p0 * np.exp(-age / tau[v])

    def advance_clutter(v, st, t):
        if lam[v] > 0 and t > st.clutter_t:
            st.clutter += int(rng.poisson(lam[v] * (t - st.clutter_t)))
        st.clutter_t = t

    def positions(st):
        m = len(st.arrivals)
        if twitter:
            return [st.clutter - st.clutter_at[i] + (m - 1 - i) for i in range(m)]
        return [st.clutter - st.clutter_at[0]]

    def relw(p):
        return incl[p] if p < L else tail_incl

    def schedule(v, st, t):
        nonlocal seq
        st.version += 1
        bound = 0.0
        for i, a in enumerate(st.arrivals):
            if not st.dead[i]:
                bound += vis(t - a, v)
                if not twitter:
                    break
        bound *= s_rate * r_max
        if bound * horizon < 1e-12:
            return  # no view expected before the horizon
        nxt = t + rng.exponential(1.0 / bound)
        if nxt <= horizon:
            seq += 1
            heapq.heappush(heap, (nxt, seq, v, st.version, bound))

    def share(u, t, generation, friend, skip=()):
        # friend: whose copy was viewed (-1 for seeds); skip: users not delivered to
        st = users.get(u)
        if st is None:
            st = users[u] = _User()
        st.state = 1
        st.version += 1
        gen[u] = generation
        share_t[u] = t
        log.add(t, INFECTION, u, item_id, friend, nf[u], st.k if st.k else -1, -1)
        for e in range(fptr[u], fptr[u + 1]):
            v = int(fidx[e])
            if v in skip:
                continue
            sv = users.get(v)
            if sv is None:
                sv = users[v] = _User()
                sv.clutter_t = t
            advance_clutter(v, sv, t)
            sv.k += 1
            if twitter or not sv.arrivals:
                sv.arrivals.append(t)
                sv.clutter_at.append(sv.clutter)
                sv.sources.append(u)
                sv.dead.append(False)
                pos = 0
            else:
                pos = sv.clutter - sv.clutter_at[0]
            log.add(t, EXPOSURE, v, item_id, u, nf[v], sv.k, pos)
            if sv.state == 0:
                schedule(v, sv, t)

    # seeds already hold the item, so they are not delivered to each other
    seed_set = frozenset(seeds.tolist())
    for s in seeds.tolist():
        share(s, 0.0, 0, -1, seed_set)

    while heap:
        t, _, v, version, bound = heapq.heappop(heap)
        st = users[v]
        if version != st.version or st.state != 0:
            continue
        advance_clutter(v, st, t)
        pos = positions(st)
        rates = []
        for i, a in enumerate(st.arrivals):
            if st.dead[i]:
                rates.append(0.0)
                continue
            rw = relw(pos[i])
            if rw == 0.0 and pos[i] >= L:
                st.dead[i] = True  # positions only grow
            rates.append(s_rate * vis(t - a, v) * rw)
            if not twitter:
                break
        total = sum(rates)
        if total > 0.0 and rng.random() * bound < total:
            x = rng.random() * total
            i = 0
            acc = rates[0]
            while acc < x and i + 1 < len(rates):
                i += 1
                acc += rates[i]
            log.add(t, SESSION, v, item_id, -1, nf[v], st.k, pos[i])
            p_share = share_prob if twitter else min(1.0, share_prob * float(cfg.signal(st.k)))
            if rng.random() < p_share:
                src = st.sources[i]
                share(v, t, int(gen[src]) + 1, src)
                continue
        schedule(v, st, t)

    events = log.build()
    return OutbreakResult(gen, int(gen.max()), None, share_t), events



def simulate_feed_items(g: DirectedGraph, cfg: FeedConfig, items: int, master_seed: int = 0, seeds_per_item: int = 1, seeds=None, **kw):
    """Independent cascades of ``items`` tracked items, each with its own stream.

    Seeds are drawn uniformly per item unless ``seeds`` fixes them.  Returns
    the list of results and one event log sorted by (item, time).
    """
    results, logs = [], []
    for i in range(items):
        rng = run_rng(master_seed, i)
        s = rng.choice(g.node_count, size=seeds_per_item, replace=False) if seeds is None else seeds
        res, log = simulate_feed_diffusion(g, cfg, s, rng, item_id=i, **kw)
        results.append(res)
        logs.append(log.sorted())
    return results, EventLog.concat(logs)


# --------------------------------------------------------------------------
# default two-strata scenario

LOW_FRIENDS_MAX = 10  # reporting cut: fewer than this many friends
HIGH_FRIENDS_MIN = 250  # reporting cut: more than this many friends


def random_follow_graph(friend_counts, seed=0) -> DirectedGraph:
    """Each user follows ``friend_counts[u]`` distinct others chosen uniformly."""
    k = np.asarray(friend_counts, dtype=np.int64)
    n = k.size
    if np.any(k < 0) or np.any(k >= n):
        raise ValueError("friend counts must lie in [0, n - 1]")
    rng = np.random.default_rng(seed)
    follower = np.repeat(np.arange(n), k)
    friend = np.empty(follower.size, dtype=np.int64)
    pos = 0
    for u in range(n):
        # sample from the n-1 other users without replacement
        pick = rng.choice(n - 1, size=k[u], replace=False)
        pick[pick >= u] += 1
        friend[pos : pos + k[u]] = pick
        pos += k[u]
    return DirectedGraph(n, follower, friend)


def two_strata_graph(n_low: int = 4000, n_high: int = 300, low_friends: int = 5, high_friends: int = 300, seed=0) -> DirectedGraph:
    """Users follow ``low_friends`` or ``high_friends`` others chosen uniformly."""
    k = np.concatenate([np.full(n_low, low_friends), np.full(n_high, high_friends)])
    return random_follow_graph(k, seed)


def two_strata_config(mode: str = TWITTER) -> FeedConfig:
    """Heavy-clutter defaults for the stratified scenario (time unit: minutes)."""
    return FeedConfig(
        kernel=VisibilityKernel(p0=1.0, alpha=2.0, c=60.0, rate_per_friend=0.1),
        bias=PositionBias.default(),
        signal=SocialSignalCurve(),
        mode=mode,
        share_prob=0.3,
        session_rate=0.2,
        budget=5,
        horizon=1440.0,
    )


def calibration_graph(n: int = 2000, friends: int = 10, seed=0) -> DirectedGraph:
    """Homogeneous follower graph used for forecast calibration."""
    return two_strata_graph(n_low=n, n_high=0, low_friends=friends, seed=seed)


def calibration_config(mode: str = TWITTER) -> FeedConfig:
    """Uniform position bias, so the visibility kernel alone carries the forecast."""
    return FeedConfig(
        kernel=VisibilityKernel(p0=1.0, alpha=2.0, c=5.0, rate_per_friend=0.1),
        bias=PositionBias.uniform(20),
        signal=SocialSignalCurve(),
        mode=mode,
        share_prob=0.1,
        session_rate=1.0,
        budget=5,
        horizon=240.0,
    )

"""Monte Carlo contagion engines on follower graphs.

Three models share synchronous-round scheduling:

* ``icm``: every newly infected node gets one chance per follower to transmit
  with probability ``mu``.
* ``fsm``: a node exposed for the first time is infected with probability
  ``mu`` and otherwise becomes permanently immune.
* ``threshold``: a node is infected once the infected share of its friends
  reaches ``phi`` (deterministic).

Random numbers are drawn up front from a numpy ``Generator`` (one uniform per
edge for ICM, one per node for FSM), then handed to a kernel from
:mod:`feedcontagion.kernels`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .events import EXPOSURE, INFECTION, EventLog
from .graph import DirectedGraph

MAX_ENUMERATION_EDGES = 25


class Model(str, Enum):
    ICM = "icm"
    FSM = "fsm"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class CascadeConfig:
    model: Model
    mu: float | None = None
    phi: float | None = None
    seeds: tuple = ()
    max_steps: int = 1_000_000_000

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.model is Model.THRESHOLD:
            if self.phi is None or self.mu is not None:
                raise ValueError("threshold model takes phi and no mu")
            if not 0.0 < self.phi <= 1.0:
                raise ValueError("phi must lie in (0, 1]")
        else:
            if self.mu is None or self.phi is not None:
                raise ValueError(f"{self.model.value} model takes mu and no phi")
            if not 0.0 <= self.mu <= 1.0:
                raise ValueError("mu must lie in [0, 1]")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")

    def with_seeds(self, seeds) -> "CascadeConfig":
        return CascadeConfig(self.model, self.mu, self.phi, tuple(seeds), self.max_steps)


@dataclass
class OutbreakResult:
    infect_time: np.ndarray  # round of infection, -1 if never infected
    steps: int
    event_log: EventLog | None = None
    share_time: np.ndarray | None = None  # continuous times (feed simulation only)
    infected: np.ndarray = field(init=False)
    per_step_counts: list = field(init=False)

    def __post_init__(self):
        self.infected = np.flatnonzero(self.infect_time >= 0)
        hit = self.infect_time[self.infected]
        self.per_step_counts = np.bincount(hit, minlength=self.steps + 1).tolist() if hit.size else []

    @property
    def size(self) -> int:
        return int(self.infected.size)

    @property
    def node_count(self) -> int:
        return int(self.infect_time.size)

    @property
    def fraction(self) -> float:
        return self.size / self.node_count if self.node_count else 0.0


def _check_seeds(g: DirectedGraph, seeds) -> np.ndarray:
    s = np.asarray(seeds, dtype=np.int64)
    if s.size == 0:
        raise ValueError("at least one seed node is required")
    if s.min() < 0 or s.max() >= g.node_count:
        raise ValueError("seed id outside the graph")
    return s


def _finish(g, t, max_steps, capture, item_id):
    steps = int(t.max()) if t.size and t.max() > 0 else 0
    log = cascade_event_log(g, t, max_steps, item_id) if capture else None
    return OutbreakResult(t, steps, log)


def cascade_event_log(g: DirectedGraph, infect_time: np.ndarray, max_steps: int = 1_000_000_000, item_id: int = 0) -> EventLog:
    """Exposure and infection records implied by a synchronous-round outbreak.

    A node infected in round r delivers an exposure to each follower in round
    r + 1 (whether or not the follower is already infected).  Seeds appear as
    infections at time 0 with no exposing friend.
    """
    nf = g.out_degree()
    src = np.flatnonzero((infect_time >= 0) & (infect_time < max_steps))
    starts = g.followers_ptr[src]
    counts = g.followers_ptr[src + 1] - starts
    total = int(counts.sum())
    offs = np.repeat(np.cumsum(counts) - counts, counts)
    e = np.repeat(starts, counts) + (np.arange(total) - offs)
    exp_user = g.followers_idx[e]
    exp_friend = np.repeat(src, counts)
    exp_time = infect_time[exp_friend] + 1

    inf_user = np.flatnonzero(infect_time >= 0)
    inf_time = infect_time[inf_user]

    time = np.concatenate([exp_time, inf_time]).astype(float)
    kind = np.concatenate([np.full(total, EXPOSURE), np.full(inf_user.size, INFECTION)])
    user = np.concatenate([exp_user, inf_user])
    friend = np.concatenate([exp_friend, np.full(inf_user.size, -1)])
    order = np.lexsort((friend, user, kind, time))
    m = time.size
    return EventLog(
        time=time[order],
        kind=kind[order],
        user=user[order],
        item=np.full(m, item_id),
        friend=friend[order],
        friend_count=nf[user[order]],
        signal_k=np.full(m, -1),
        position=np.full(m, -1),
    )


def run_icm(g: DirectedGraph, cfg: CascadeConfig, seed=None, capture: bool = False, item_id: int = 0) -> OutbreakResult:
    if cfg.model is not Model.ICM:
        raise ValueError("run_icm needs an icm config")
    seeds = _check_seeds(g, cfg.seeds)
    rng = np.random.default_rng(seed)
    coins = rng.random(g.edge_count)
    t = kernels.icm_spread(g.followers_ptr, g.followers_idx, coins, float(cfg.mu), seeds, int(cfg.max_steps))
    return _finish(g, t, cfg.max_steps, capture, item_id)


def run_fsm(g: DirectedGraph, cfg: CascadeConfig, seed=None, capture: bool = False, item_id: int = 0) -> OutbreakResult:
    if cfg.model is not Model.FSM:
        raise ValueError("run_fsm needs an fsm config")
    seeds = _check_seeds(g, cfg.seeds)
    rng = np.random.default_rng(seed)
    coins = rng.random(g.node_count)
    t = kernels.fsm_spread(g.followers_ptr, g.followers_idx, coins, float(cfg.mu), seeds, int(cfg.max_steps))
    return _finish(g, t, cfg.max_steps, capture, item_id)


def run_threshold(g: DirectedGraph, cfg: CascadeConfig, capture: bool = False, item_id: int = 0) -> OutbreakResult:
    if cfg.model is not Model.THRESHOLD:
        raise ValueError("run_threshold needs a threshold config")
    seeds = _check_seeds(g, cfg.seeds)
    fc = g.out_degree().astype(float)
    t = kernels.threshold_spread(g.followers_ptr, g.followers_idx, fc, float(cfg.phi), seeds, int(cfg.max_steps))
    return _finish(g, t, cfg.max_steps, capture, item_id)


def run(g: DirectedGraph, cfg: CascadeConfig, seed=None, capture: bool = False, item_id: int = 0) -> OutbreakResult:
    if cfg.model is Model.ICM:
        return run_icm(g, cfg, seed, capture, item_id)
    if cfg.model is Model.FSM:
        return run_fsm(g, cfg, seed, capture, item_id)
    return run_threshold(g, cfg, capture, item_id)


# --------------------------------------------------------------------------
# exact enumeration


@dataclass
class ExactDistribution:
    node_probability: np.ndarray
    size_distribution: dict
    mean: float


def exhaustive_icm_oracle(g: DirectedGraph, cfg: CascadeConfig) -> ExactDistribution:
    """Exact ICM outcome by summing over all 2**E edge-activation patterns."""
    if cfg.model is not Model.ICM:
        raise ValueError("oracle needs an icm config")
    if g.edge_count > MAX_ENUMERATION_EDGES:
        raise ValueError(f"graph has {g.edge_count} edges; enumeration is limited to {MAX_ENUMERATION_EDGES}")
    seeds = _check_seeds(g, cfg.seeds)
    node_p, size_p = kernels.enumerate_icm(g.friend, g.follower, float(cfg.mu), seeds, g.node_count)
    dist = {int(k): float(p) for k, p in enumerate(size_p) if p > 0}
    mean = float(np.dot(np.arange(size_p.size), size_p))
    return ExactDistribution(node_p, dist, mean)


def icm_node_frequencies(g: DirectedGraph, mu: float, seeds, runs: int, seed=None, chunk: int = 1 << 14) -> np.ndarray:
    """Fraction of ``runs`` independent ICM cascades that infect each node.

    Batched for small graphs: coins for ``chunk`` runs are drawn as one
    (chunk, E) matrix.
    """
    seeds = _check_seeds(g, seeds)
    rng = np.random.default_rng(seed)
    hits = np.zeros(g.node_count, dtype=np.int64)
    done = 0
    while done < runs:
        b = min(chunk, runs - done)
        active = rng.random((b, g.edge_count)) < mu
        hits += kernels.reach_batch(g.friend, g.follower, active, seeds, g.node_count).sum(axis=0)
        done += b
    return hits / runs


# --------------------------------------------------------------------------
# sweeps


def run_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Private generator for one run, derived from the master seed and indices."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=tuple(key))))


@dataclass
class SweepRow:
    mu: float
    runs: int
    mean_size: float
    std: float
    p50: float
    p90: float
    p99: float
    max: int
    mean_fraction: float
    epidemic_share: float
    mean_epidemic_fraction: float


@dataclass
class SweepTable:
    rows: list
    sizes: np.ndarray  # (len(mu_grid), runs)
    node_count: int
    epidemic_cutoff: int

    COLUMNS = ("mu", "runs", "mean_size", "std", "p50", "p90", "p99", "max")

    def column(self, name) -> np.ndarray:
        return np.asarray([getattr(r, name) for r in self.rows])


def default_epidemic_cutoff(n: int) -> int:
    # outbreaks larger than n**(2/3) cannot be finite clusters at large n
    return max(1, int(round(n ** (2.0 / 3.0))))


def sweep(
    g: DirectedGraph,
    model,
    mu_grid: Sequence[float],
    runs_per_mu: int,
    seed_policy="uniform",
    master_seed: int = 0,
    epidemic_cutoff: int | None = None,
    capture: bool = False,
    on_run: Callable | None = None,
    max_steps: int = 1_000_000_000,
) -> SweepTable:
    """Outbreak-size statistics over a grid of transmissibilities.

    ``seed_policy`` is ``"uniform"`` (one uniformly random seed node per run)
    or an explicit sequence of seed nodes used for every run.  For the
    threshold model the grid values are read as ``phi``.  Runs whose size
    exceeds ``epidemic_cutoff`` count as epidemics.
    """
    model = Model(model)
    if runs_per_mu < 1:
        raise ValueError("runs_per_mu must be >= 1")
    n = g.node_count
    if n == 0:
        raise ValueError("graph has no nodes")
    cutoff = default_epidemic_cutoff(n) if epidemic_cutoff is None else int(epidemic_cutoff)
    fixed = None
    if not (isinstance(seed_policy, str) and seed_policy == "uniform"):
        fixed = _check_seeds(g, seed_policy)

    sizes = np.zeros((len(mu_grid), runs_per_mu), dtype=np.int64)
    rows = []
    for i, x in enumerate(mu_grid):
        x = float(x)
        for j in range(runs_per_mu):
            rng = run_rng(master_seed, i, j)
            seeds = fixed if fixed is not None else np.array([rng.integers(n)], dtype=np.int64)
            if model is Model.THRESHOLD:
                cfg = CascadeConfig(model, phi=x, seeds=tuple(seeds), max_steps=max_steps)
                res = run_threshold(g, cfg, capture=capture, item_id=j)
            else:
                cfg = CascadeConfig(model, mu=x, seeds=tuple(seeds), max_steps=max_steps)
                res = run(g, cfg, rng, capture=capture, item_id=j)
            sizes[i, j] = res.size
            if on_run is not None:
                on_run(i, j, x, res)
        s = sizes[i].astype(float)
        epi = s > cutoff
        rows.append(
            SweepRow(
                mu=x,
                runs=runs_per_mu,
                mean_size=float(s.mean()),
                std=float(s.std(ddof=1)) if runs_per_mu > 1 else 0.0,
                p50=float(np.quantile(s, 0.5)),
                p90=float(np.quantile(s, 0.9)),
                p99=float(np.quantile(s, 0.99)),
                max=int(s.max()),
                mean_fraction=float(s.mean() / n),
                epidemic_share=float(epi.mean()),
                mean_epidemic_fraction=float(s[epi].mean() / n) if epi.any() else 0.0,
            )
        )
    return SweepTable(rows, sizes, n, cutoff)

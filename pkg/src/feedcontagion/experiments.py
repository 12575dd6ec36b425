"""Reproducible experiment recipes.

Each recipe takes a parameter dict (defaults below, overridable from a JSON
config), a master seed and an output directory, and writes CSV tables plus
SVG figures.  Files are produced in a scratch directory and moved into place
only when the whole recipe succeeds.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, attention, estimation, percolation, predict, svgplot
from .cascade import CascadeConfig, Model, default_epidemic_cutoff, run, run_rng, sweep
from .graph import (
    DegreeSequence,
    DirectedGraph,
    EdgeListFormat,
    configuration_model,
    load_degree_sequence,
    load_edge_list,
    power_law_degrees,
    random_tree,
    regular_degrees,
)


class RecipeError(ValueError):
    pass


# --------------------------------------------------------------------------
# graph specs


def build_graph(spec: dict, seed: int) -> DirectedGraph:
    """Graph from a spec such as ``{"kind": "regular", "n": 10000, "k": 3}``.

    Kinds: ``regular``, ``powerlaw``, ``degrees`` (file), ``tree``,
    ``follow`` (random follow graph with 1 + Poisson friend counts),
    ``two-strata``, ``file`` (edge list).
    """
    kind = spec.get("kind")
    rng = np.random.default_rng(seed)
    if kind == "regular":
        return configuration_model(regular_degrees(int(spec["n"]), int(spec["k"])), rng)
    if kind == "powerlaw":
        seq = power_law_degrees(int(spec["n"]), float(spec["exponent"]), rng, int(spec.get("k_min", 1)), spec.get("k_max"))
        return configuration_model(seq, rng)
    if kind == "degrees":
        return configuration_model(load_degree_sequence(spec["path"]), rng)
    if kind == "tree":
        return random_tree(int(spec["n"]), rng)
    if kind == "follow":
        counts = 1 + rng.poisson(float(spec.get("mean_extra", 3.0)), int(spec["n"]))
        return attention.random_follow_graph(np.minimum(counts, int(spec["n"]) - 1), rng)
    if kind == "two-strata":
        return attention.two_strata_graph(
            int(spec.get("n_low", 4000)), int(spec.get("n_high", 300)), int(spec.get("low_friends", 5)), int(spec.get("high_friends", 300)), rng
        )
    if kind == "file":
        return load_edge_list(spec["path"], EdgeListFormat(undirected=bool(spec.get("undirected", False))))
    raise RecipeError(f"unknown graph kind {kind!r}")


# --------------------------------------------------------------------------
# output plumbing


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def provenance(recipe: str, params: dict, master_seed: int) -> list:
    return [
        f"feedcontagion {__version__}",
        f"recipe: {recipe}",
        f"master_seed: {master_seed}",
        f"config_hash: {config_hash({'recipe': recipe, 'params': params, 'master_seed': master_seed})}",
    ]


def write_table(path, columns, rows, header_lines) -> None:
    lines = [f"# {h}" for h in header_lines]
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(_cell(v) for v in r))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _save_svg(path, header_lines, *args, **kw):
    text = svgplot.plot(*args, **kw)
    comment = "".join(f"<!-- {h} -->\n" for h in header_lines)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(comment + text)


@dataclass
class ExperimentConfig:
    name: str
    params: dict = field(default_factory=dict)
    master_seed: int = 0
    out: str = "results"

    @classmethod
    def from_dict(cls, d: dict, name: str | None = None, master_seed: int | None = None, out: str | None = None):
        d = dict(d or {})
        unknown = set(d) - {"experiment", "name", "params", "master_seed", "out"}
        if unknown:
            raise RecipeError(f"unknown config keys: {sorted(unknown)}; recipe parameters go under 'params'")
        cfg = cls(
            name=name or d.get("experiment") or d.get("name") or "",
            params=dict(d.get("params", {})),
            master_seed=int(master_seed if master_seed is not None else d.get("master_seed", 0)),
            out=out or d.get("out") or "results",
        )
        if cfg.name not in RECIPES:
            raise RecipeError(f"unknown recipe {cfg.name!r}; choose from {', '.join(sorted(RECIPES))}")
        return cfg


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run a recipe; returns the written file names.  Nothing is left behind on failure."""
    if cfg.name not in RECIPES:
        raise RecipeError(f"unknown recipe {cfg.name!r}; choose from {', '.join(sorted(RECIPES))}")
    recipe, defaults = RECIPES[cfg.name]
    unknown = set(cfg.params) - set(defaults)
    if unknown:
        raise RecipeError(f"unknown parameters for {cfg.name}: {sorted(unknown)}")
    params = {**defaults, **cfg.params}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        header = provenance(cfg.name, params, cfg.master_seed)
        recipe(params, cfg.master_seed, scratch, header)
        names = sorted(os.listdir(scratch))
        for name in names:
            os.replace(scratch / name, out / name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    return names


# --------------------------------------------------------------------------
# recipes


def _grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    return np.asarray(spec, dtype=float)


def icm_vs_theory(p, seed, out, header):
    g = build_graph(p["graph"], seed)
    grid = _grid(p["mu_grid"])
    table = sweep(g, Model.ICM, grid, int(p["runs"]), master_seed=seed)
    gf = percolation.from_graph(g)
    theory = [percolation.giant_outbreak_fraction(gf, float(T)) for T in grid]
    rows = [(r.mu, r.runs, r.mean_fraction, r.std / g.node_count, r.epidemic_share, r.mean_epidemic_fraction, t.S, t.T_c) for r, t in zip(table.rows, theory)]
    write_table(
        out / "icm_vs_theory.csv",
        ("mu", "runs", "mean_fraction", "std_fraction", "epidemic_share", "mean_epidemic_fraction", "theory_S", "T_c"),
        rows,
        header + [f"graph: {json.dumps(p['graph'], sort_keys=True)}", f"epidemic_cutoff: {table.epidemic_cutoff}"],
    )
    _write_sweep(out / "icm_sweep.csv", table, header)
    _save_svg(
        out / "icm_vs_theory.svg",
        header,
        [
            svgplot.Series("simulated, all runs", grid, table.column("mean_fraction"), "both"),
            svgplot.Series("simulated, epidemics", grid, table.column("mean_epidemic_fraction"), "scatter"),
            svgplot.Series("theory S(T)", grid, [t.S for t in theory], "line"),
        ],
        title="Outbreak size vs transmissibility",
        xlabel="mu",
        ylabel="fraction infected",
    )


def _write_sweep(path, table, header):
    write_table(path, ("mu", "runs", "mean_size", "std", "p50", "p90", "p99", "max"), [(r.mu, r.runs, r.mean_size, r.std, r.p50, r.p90, r.p99, r.max) for r in table.rows], header)


def fsm_suppression(p, seed, out, header):
    g = build_graph(p["graph"], seed)
    grid = _grid(p["mu_grid"])
    runs = int(p["runs"])
    icm = sweep(g, Model.ICM, grid, runs, master_seed=seed)
    fsm = sweep(g, Model.FSM, grid, runs, master_seed=seed + 1)
    rows = []
    for a, b in zip(icm.rows, fsm.rows):
        se_a, se_b = a.std / np.sqrt(runs), b.std / np.sqrt(runs)
        rows.append((a.mu, runs, a.mean_size, se_a, b.mean_size, se_b, a.mean_size / b.mean_size if b.mean_size > 0 else float("inf")))
    write_table(
        out / "fsm_suppression.csv",
        ("mu", "runs", "icm_mean_size", "icm_se", "fsm_mean_size", "fsm_se", "icm_fsm_ratio"),
        rows,
        header + [f"graph: {json.dumps(p['graph'], sort_keys=True)}"],
    )
    _write_sweep(out / "icm_sweep.csv", icm, header + ["model: icm"])
    _write_sweep(out / "fsm_sweep.csv", fsm, header + ["model: fsm"])
    _save_svg(
        out / "fsm_suppression.svg",
        header,
        [svgplot.Series("ICM", grid, icm.column("mean_size"), "both"), svgplot.Series("FSM", grid, fsm.column("mean_size"), "both")],
        title="Mean outbreak size",
        xlabel="mu",
        ylabel="mean size",
        logy=True,
    )


def _feed_config(p, mode=None) -> attention.FeedConfig:
    base = p.get("feed")
    if base:
        cfg = attention.FeedConfig.from_dict(base)
    elif p.get("scenario") == "calibration":
        cfg = attention.calibration_config()
    else:
        cfg = attention.two_strata_config()
    overrides = {k: p[k] for k in ("share_prob", "session_rate", "horizon") if p.get(k) is not None}
    if mode is not None:
        overrides["mode"] = mode
    if overrides:
        d = cfg.to_dict()
        d.update(overrides)
        cfg = attention.FeedConfig.from_dict(d)
    return cfg


def _size_histogram(sizes):
    sizes = np.asarray(sizes, dtype=np.int64)
    values, counts = np.unique(sizes, return_counts=True)
    return values, counts


def outbreak_histogram(p, seed, out, header):
    g = build_graph(p["graph"], seed)
    cfg = _feed_config(p)
    results, log = attention.simulate_feed_items(g, cfg, int(p["items"]), master_seed=seed)
    feed_sizes = [r.size for r in results]
    # independent-cascade counterpart with the per-exposure response measured in the feeds
    try:
        curve = estimation.exposure_response(log)
        mu = float(curve.p[curve.at(1)]) if curve.at(1) >= 0 else 0.0
    except estimation.EstimationError:
        mu = 0.0
    icm_sizes = []
    for i in range(int(p["items"])):
        rng = run_rng(seed + 1, i)
        s = int(rng.integers(g.node_count))
        icm_sizes.append(run(g, CascadeConfig(Model.ICM, mu=mu, seeds=(s,)), rng).size)
    rows = []
    for label, sizes in (("feed", feed_sizes), ("icm", icm_sizes)):
        v, c = _size_histogram(sizes)
        rows.extend((label, int(a), int(b)) for a, b in zip(v, c))
    write_table(out / "outbreak_histogram.csv", ("model", "size", "count"), rows, header + [f"icm_mu: {mu:.12g}", f"graph: {json.dumps(p['graph'], sort_keys=True)}"])
    series = []
    for label, sizes in (("feed simulation", feed_sizes), (f"ICM mu={mu:.3g}", icm_sizes)):
        v, c = _size_histogram(sizes)
        series.append(svgplot.Series(label, v, c / len(sizes), "scatter"))
    _save_svg(out / "outbreak_histogram.svg", header, series, title="Outbreak size distribution", xlabel="size", ylabel="fraction of items", logx=True, logy=True)


def attention_strata(p, seed, out, header):
    g = build_graph(p["graph"], seed)
    cfg = _feed_config(p)
    _, log = attention.simulate_feed_items(g, cfg, int(p["items"]), master_seed=seed)
    strata = estimation.parse_strata(p["strata"])
    pt = estimation.pair_table(log)
    per = estimation.exposure_response(log, strata, pairs=pt)
    pooled = estimation.exposure_response(log, pairs=pt)
    estimation.write_response_csv(list(per.values()) + [pooled], out / "exposure_response.csv", header)
    tr = estimation.time_response(log, strata, base=float(p["age_base"]), horizon=cfg.horizon, pairs=pt)
    tr_all = estimation.time_response(log, base=float(p["age_base"]), horizon=cfg.horizon, pairs=pt)
    estimation.write_response_csv(list(tr.values()) + [tr_all], out / "time_response.csv", header)
    rows = []
    for name, c in list(tr.items()) + [("all", tr_all)]:
        lo, hi = c.rate_interval()
        rows.extend((name, a, b, r, x, y, estimation.half_life(c)) for a, b, r, x, y in zip(c.bin_lo, c.bin_hi, c.rate, lo, hi))
    write_table(out / "time_response_rate.csv", ("stratum", "bin_lo", "bin_hi", "rate", "rate_lo", "rate_hi", "half_life"), rows, header)
    pos = []
    for label, bias in (("default", attention.PositionBias.default()), ("uptick", attention.PositionBias.default(uptick=True))):
        rel = attention.measure_position_attention(bias, 100, int(p["position_trials"]), seed, cfg.budget)
        pos.append((label, rel))
    write_table(out / "position_attention.csv", ("position", "default", "uptick"), [(i + 1, a, b) for i, (a, b) in enumerate(zip(pos[0][1], pos[1][1]))], header)
    _save_svg(
        out / "exposure_response.svg",
        header,
        [svgplot.Series(c.stratum, c.bin_lo, c.p, "both") for c in list(per.values()) + [pooled]],
        title="Exposure response by connectivity",
        xlabel="k (infected friends)",
        ylabel="P(share)",
        logx=True,
    )
    _save_svg(
        out / "time_response.svg",
        header,
        [svgplot.Series(c.stratum, np.maximum(c.bin_lo, c.bin_hi / 2), c.rate, "both") for c in tr.values()],
        title="Response rate vs time since exposure",
        xlabel="minutes since exposure",
        ylabel="rate per minute",
        logx=True,
        logy=True,
    )
    x = np.arange(1, 101)
    _save_svg(
        out / "position_attention.svg",
        header,
        [svgplot.Series(label, x, rel, "line") for label, rel in pos],
        title="Relative attention by list position",
        xlabel="position",
        ylabel="attention / uniform",
    )


def calibration(p, seed, out, header):
    g = build_graph(p["graph"], seed)
    series = []
    for mode in (attention.TWITTER, attention.DIGG):
        cfg = _feed_config(p, mode)
        _, log = attention.simulate_feed_items(g, cfg, int(p["items"]), master_seed=seed)
        records = predict.records_from_log(log, cfg.response_kernel(), cfg.signal, mode, float(p["window"]), float(p["step"]), cfg.horizon, p["max_age"])
        table = predict.calibrate(records, int(p["bins"]))
        table.to_csv(out / f"calibration_{mode}.csv", header + [f"mode: {mode}", f"records: {len(records)}"])
        by_k = predict.calibrate(records, int(p["bins"]), group_by_k=int(p["k_groups"]))
        by_k.to_csv(out / f"calibration_{mode}_by_k.csv", header + [f"mode: {mode}"])
        series.append(svgplot.Series(mode, table.mean_pred, table.obs_freq, "both"))
    _save_svg(out / "calibration.svg", header, series, title="Observed vs predicted", xlabel="predicted probability", ylabel="observed frequency", diagonal=True)


RECIPES = {
    "icm-vs-theory": (
        icm_vs_theory,
        {"graph": {"kind": "regular", "n": 10000, "k": 3}, "mu_grid": {"start": 0.0, "stop": 1.0, "num": 21}, "runs": 200},
    ),
    "fsm-suppression": (
        fsm_suppression,
        {"graph": {"kind": "powerlaw", "n": 10000, "exponent": 2.3, "k_min": 1}, "mu_grid": {"start": 0.1, "stop": 0.9, "num": 9}, "runs": 200},
    ),
    "outbreak-histogram": (
        outbreak_histogram,
        {"graph": {"kind": "two-strata"}, "items": 400, "feed": None, "scenario": "two-strata", "share_prob": None, "session_rate": None, "horizon": None},
    ),
    "attention-strata": (
        attention_strata,
        {
            "graph": {"kind": "two-strata"},
            "items": 400,
            "feed": None,
            "scenario": "two-strata",
            "share_prob": None,
            "session_rate": None,
            "horizon": None,
            "strata": "lt10:0-10,gt250:251-inf",
            "age_base": 1.0,
            "position_trials": 100000,
        },
    ),
    "calibration": (
        calibration,
        {
            "graph": {"kind": "two-strata", "n_low": 2000, "n_high": 0, "low_friends": 10},
            "items": 100,
            "feed": None,
            "scenario": "calibration",
            "share_prob": None,
            "session_rate": None,
            "horizon": None,
            "window": predict.DEFAULT_WINDOW,
            "step": predict.DEFAULT_STEP,
            "max_age": 30.0,
            "bins": 10,
            "k_groups": 4,
        },
    ),
}

"""Command-line entry point: ``feedcontagion <command> ...``.

Exit status: 0 on success, 1 for usage errors, 2 when a run fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__, attention, estimation, experiments, percolation, predict
from .cascade import CascadeConfig, Model, run, run_rng, sweep
from .events import EventLog
from .graph import (
    EdgeListFormat,
    GraphError,
    degree_statistics,
    largest_eigenvalue,
    load_edge_list,
    write_edge_list,
)

log = logging.getLogger("feedcontagion")

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def _grid(text: str) -> np.ndarray:
    """``start:stop:num`` or a comma list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.linspace(float(a), float(b), int(n))
        return np.asarray([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:num or a comma list") from None


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad id list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    p = _Parser(prog="feedcontagion", description="Contagion simulation, theory, estimation and forecasting on follower graphs.", parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("graph", help="generate or inspect graphs", parents=[common])
    gsub = g.add_subparsers(dest="graph_command", metavar="{gen,stats}", parser_class=_Parser)
    gsub.required = True
    gen = gsub.add_parser("gen", help="write an edge list", parents=[common])
    gen.add_argument("--kind", choices=("powerlaw", "regular", "degrees", "tree", "follow", "two-strata"), required=True)
    gen.add_argument("--n", type=int)
    gen.add_argument("--exponent", type=float)
    gen.add_argument("--k", type=int, help="degree for regular graphs")
    gen.add_argument("--k-min", type=int, default=1)
    gen.add_argument("--k-max", type=int)
    gen.add_argument("--degrees", help="degree-sequence file (kind=degrees)")
    st = gsub.add_parser("stats", help="degree moments, leading eigenvalue, thresholds", parents=[common])
    st.add_argument("edges", help="edge-list file")
    st.add_argument("--undirected", action="store_true", help="treat each line as an undirected edge")

    for name, helptext in (("sim", "run outbreaks"), ("sweep", "outbreak sizes over a parameter grid")):
        s = sub.add_parser(name, help=helptext, parents=[common])
        s.add_argument("graph", help="edge-list file")
        s.add_argument("--undirected", action="store_true")
        s.add_argument("--model", choices=[m.value for m in Model], default="icm")
        s.add_argument("--runs", type=int, default=100)
        if name == "sim":
            s.add_argument("--mu", type=float)
            s.add_argument("--phi", type=float)
            s.add_argument("--seeds", type=_int_list, help="comma-separated seed nodes (default: one uniform node per run)")
            s.add_argument("--dump", help="JSON-lines file with the event log of every run")
        else:
            s.add_argument("--grid", type=_grid, default=_grid("0:1:21"), help="start:stop:num or comma list")
            s.add_argument("--seeds", type=_int_list)
            s.add_argument("--dump", help="JSON-lines file with the event log of every run")

    th = sub.add_parser("theory", help="percolation outbreak size S(T)", parents=[common])
    src = th.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", help="edge-list file")
    src.add_argument("--degrees", help="degree-sequence file")
    th.add_argument("--undirected", action="store_true")
    th.add_argument("--grid", type=_grid, default=_grid("0:1:21"))

    fs = sub.add_parser("feed-sim", help="limited-attention feed simulation", parents=[common])
    fs.add_argument("--graph", help="edge-list file (default: the two-strata scenario graph)")
    fs.add_argument("--scenario", choices=("two-strata", "calibration"), default="two-strata")
    fs.add_argument("--mode", choices=(attention.TWITTER, attention.DIGG))
    fs.add_argument("--items", type=int, default=100)
    fs.add_argument("--seeds", type=_int_list, help="fixed seed users for every item")

    est = sub.add_parser("estimate", help="response curves from an event log", parents=[common])
    esub = est.add_subparsers(dest="estimate_command", metavar="{exposure,time}", parser_class=_Parser)
    esub.required = True
    for name in ("exposure", "time"):
        e = esub.add_parser(name, parents=[common])
        e.add_argument("log", help="event-log CSV")
        e.add_argument("--strata", help="name:lo-hi,... friend-count ranges; 'default' for <10 and >250")
        if name == "exposure":
            e.add_argument("--convention", choices=(estimation.FINAL, estimation.AT_INFECTION), default=estimation.FINAL)
            e.add_argument("--max-k", type=int)
        else:
            e.add_argument("--base", type=float, default=1.0, help="width of the first age bin")
            e.add_argument("--horizon", type=float)

    pr = sub.add_parser("predict", help="score an event log with the visibility model", parents=[common])
    pr.add_argument("log", help="event-log CSV")
    pr.add_argument("--mode", choices=(attention.TWITTER, attention.DIGG))
    pr.add_argument("--window", type=float, default=predict.DEFAULT_WINDOW)
    pr.add_argument("--step", type=float, default=predict.DEFAULT_STEP)
    pr.add_argument("--horizon", type=float)
    pr.add_argument("--max-age", type=float)

    ca = sub.add_parser("calibrate", help="calibration table from prediction records", parents=[common])
    ca.add_argument("records", help="prediction-record CSV")
    ca.add_argument("--bins", type=int, default=10)
    ca.add_argument("--method", choices=("quantile", "uniform"), default="quantile")
    ca.add_argument("--group-by-k", type=int)

    ex = sub.add_parser("experiment", help="run a figure recipe", parents=[common])
    ex.add_argument("recipe", choices=sorted(experiments.RECIPES))
    return p


# --------------------------------------------------------------------------
# helpers


def _load_config(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _emit(args, text: str) -> None:
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_with(args, writer) -> None:
    out = getattr(args, "out", None)
    if out:
        writer(out)
    else:
        writer(sys.stdout)


def _header(args, **extra) -> list:
    lines = [f"feedcontagion {__version__}", f"command: {args.command}", f"master_seed: {args.seed}"]
    lines += [f"{k}: {v}" for k, v in extra.items()]
    return lines


def _graph(path, undirected=False):
    return load_edge_list(path, EdgeListFormat(undirected=undirected))


def _feed_config(args, cfg_dict) -> attention.FeedConfig:
    feed = cfg_dict.get("feed", cfg_dict if "kernel" in cfg_dict or "mode" in cfg_dict else None)
    if feed:
        cfg = attention.FeedConfig.from_dict(feed)
    elif getattr(args, "scenario", "two-strata") == "calibration":
        cfg = attention.calibration_config()
    else:
        cfg = attention.two_strata_config()
    if getattr(args, "mode", None):
        d = cfg.to_dict()
        d["mode"] = args.mode
        cfg = attention.FeedConfig.from_dict(d)
    return cfg


def _table(columns, rows) -> str:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(experiments._cell(v) for v in r))
    return "\n".join(lines) + "\n"


def _dump_runs(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _log_json(lg: EventLog) -> list:
    from .events import KIND_NAMES

    return [
        [float(t), KIND_NAMES[int(k)], int(u), int(f)]
        for t, k, u, f in zip(lg.time.tolist(), lg.kind.tolist(), lg.user.tolist(), lg.friend.tolist())
    ]


# --------------------------------------------------------------------------
# commands


def cmd_graph(args) -> int:
    if args.graph_command == "stats":
        g = _graph(args.edges, args.undirected)
        ds = degree_statistics(g)
        sp = largest_eigenvalue(g)
        gf = percolation.from_graph(g)
        lines = [
            f"nodes: {g.node_count}",
            f"edges: {g.edge_count}",
            f"symmetric: {g.is_symmetric()}",
            f"mean_degree: {ds.mean:.12g}",
            f"second_moment: {ds.second_moment:.12g}",
            f"max_degree: {ds.max_degree}",
            f"lambda_max: {sp.lambda_max:.12g}",
            f"spectral_threshold: {sp.epidemic_threshold:.12g}",
            f"percolation_threshold: {percolation.critical_transmissibility(gf):.12g}",
        ]
        if not sp.converged:
            lines.append("warning: power iteration did not converge")
        _emit(args, "\n".join(lines) + "\n")
        return EXIT_OK

    spec = {"kind": args.kind}
    need = {"powerlaw": ("n", "exponent"), "regular": ("n", "k"), "tree": ("n",), "follow": ("n",), "degrees": ("degrees",), "two-strata": ()}[args.kind]
    for name in need:
        if getattr(args, name) is None:
            raise UsageError(f"graph gen --kind {args.kind} requires --{name.replace('_', '-')}")
    if args.kind == "powerlaw":
        spec.update(n=args.n, exponent=args.exponent, k_min=args.k_min, k_max=args.k_max)
    elif args.kind == "regular":
        spec.update(n=args.n, k=args.k)
    elif args.kind in ("tree", "follow"):
        spec.update(n=args.n)
    elif args.kind == "degrees":
        spec.update(path=args.degrees)
    g = experiments.build_graph(spec, args.seed)
    header = [f"feedcontagion {__version__}", f"master_seed: {args.seed}", f"spec: {json.dumps(spec, sort_keys=True)}"]
    _write_with(args, lambda dest: write_edge_list(g, dest, header))
    log.info("wrote %d nodes, %d edges", g.node_count, g.edge_count)
    return EXIT_OK


def _cascade_cfg(args) -> CascadeConfig:
    model = Model(args.model)
    if model is Model.THRESHOLD:
        if args.phi is None:
            raise UsageError("--model threshold requires --phi")
        return CascadeConfig(model, phi=args.phi)
    if args.mu is None:
        raise UsageError(f"--model {model.value} requires --mu")
    return CascadeConfig(model, mu=args.mu)


def cmd_sim(args) -> int:
    g = _graph(args.graph, args.undirected)
    cfg = _cascade_cfg(args)
    if args.runs < 1:
        raise UsageError("--runs must be positive")
    rows, dumps = [], []
    for i in range(args.runs):
        rng = run_rng(args.seed, i)
        seeds = args.seeds if args.seeds else (int(rng.integers(g.node_count)),)
        res = run(g, cfg.with_seeds(seeds), rng, capture=bool(args.dump), item_id=i)
        rows.append((i, res.size, res.fraction, res.steps))
        if args.dump:
            dumps.append({"run": i, "seeds": list(seeds), "size": res.size, "events": _log_json(res.event_log)})
    if args.dump:
        _dump_runs(args.dump, dumps)
    text = "".join(f"# {h}\n" for h in _header(args, model=cfg.model.value, mu=cfg.mu, phi=cfg.phi)) + _table(("run", "size", "fraction", "steps"), rows)
    _emit(args, text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    g = _graph(args.graph, args.undirected)
    if args.runs < 1:
        raise UsageError("--runs must be positive")
    dumps = []

    def on_run(i, j, x, res):
        dumps.append({"grid_index": i, "value": x, "run": j, "size": res.size, "events": _log_json(res.event_log)})

    table = sweep(
        g,
        Model(args.model),
        args.grid,
        args.runs,
        seed_policy=args.seeds if args.seeds else "uniform",
        master_seed=args.seed,
        capture=bool(args.dump),
        on_run=on_run if args.dump else None,
    )
    if args.dump:
        _dump_runs(args.dump, dumps)
    rows = [(r.mu, r.runs, r.mean_size, r.std, r.p50, r.p90, r.p99, r.max) for r in table.rows]
    text = "".join(f"# {h}\n" for h in _header(args, model=args.model)) + _table(("mu", "runs", "mean_size", "std", "p50", "p90", "p99", "max"), rows)
    _emit(args, text)
    return EXIT_OK


def cmd_theory(args) -> int:
    if args.graph:
        gf = percolation.from_graph(_graph(args.graph, args.undirected))
    else:
        from .graph import load_degree_sequence

        gf = percolation.GeneratingFunctions.from_degrees(load_degree_sequence(args.degrees).as_array())
    if np.any((args.grid < 0) | (args.grid > 1)):
        raise UsageError("grid values must lie in [0, 1]")
    rows = []
    for T in args.grid:
        th = percolation.giant_outbreak_fraction(gf, float(T))
        if not th.converged:
            log.warning("fixed point not converged at T=%g (residual %.3g)", T, th.residual)
        rows.append((th.T, th.u, th.S, th.T_c))
    text = "".join(f"# {h}\n" for h in _header(args)) + _table(("T", "u", "S", "T_c"), rows)
    _emit(args, text)
    return EXIT_OK


def cmd_feed_sim(args) -> int:
    conf = _load_config(args)
    cfg = _feed_config(args, conf)
    if args.graph:
        g = _graph(args.graph)
    elif args.scenario == "calibration":
        g = attention.calibration_graph(seed=args.seed)
    else:
        g = attention.two_strata_graph(seed=args.seed)
    if args.items < 1:
        raise UsageError("--items must be positive")
    results, lg = attention.simulate_feed_items(g, cfg, args.items, args.seed, seeds=args.seeds)
    sizes = np.array([r.size for r in results])
    log.info("items=%d mean_size=%.3f max_size=%d", args.items, sizes.mean(), sizes.max())
    header = _header(args, mode=cfg.mode, items=args.items, feed_config=experiments.config_hash(cfg.to_dict()))
    _write_with(args, lambda dest: lg.to_csv(dest, header))
    return EXIT_OK


def cmd_estimate(args) -> int:
    lg = EventLog.from_csv(args.log)
    strata = None
    if args.strata:
        strata = estimation.DEFAULT_STRATA if args.strata == "default" else estimation.parse_strata(args.strata)
    pt = estimation.pair_table(lg)
    if args.estimate_command == "exposure":
        res = estimation.exposure_response(lg, strata, args.convention, args.max_k, pairs=pt)
    else:
        res = estimation.time_response(lg, strata, args.base, args.horizon, pairs=pt)
    curves = [res] if strata is None else list(res.values())
    header = _header(args, estimate=args.estimate_command, source=args.log)
    _write_with(args, lambda dest: estimation.write_response_csv(curves, dest, header))
    return EXIT_OK


def cmd_predict(args) -> int:
    conf = _load_config(args)
    cfg = _feed_config(args, conf)
    lg = EventLog.from_csv(args.log)
    records = predict.records_from_log(lg, cfg.response_kernel(), cfg.signal, cfg.mode, args.window, args.step, args.horizon if args.horizon else cfg.horizon, args.max_age)
    header = _header(args, mode=cfg.mode, source=args.log)
    _write_with(args, lambda dest: records.to_csv(dest, header))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    records = predict.RecordTable.from_csv(args.records)
    if args.bins < 1:
        raise UsageError("--bins must be positive")
    table = predict.calibrate(records, args.bins, args.method, args.group_by_k)
    header = _header(args, source=args.records)
    _write_with(args, lambda dest: table.to_csv(dest, header))
    return EXIT_OK


def cmd_experiment(args) -> int:
    conf = _load_config(args)
    seed = args.seed if args.seed_given else None
    cfg = experiments.ExperimentConfig.from_dict(conf, args.recipe, seed, getattr(args, "out", None))
    names = experiments.run_experiment(cfg)
    for n in names:
        print(f"{cfg.out}/{n}")
    return EXIT_OK


COMMANDS = {
    "graph": cmd_graph,
    "sim": cmd_sim,
    "sweep": cmd_sweep,
    "theory": cmd_theory,
    "feed-sim": cmd_feed_sim,
    "estimate": cmd_estimate,
    "predict": cmd_predict,
    "calibrate": cmd_calibrate,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = hasattr(args, "seed")
    if not args.seed_given:
        args.seed = 0
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"feedcontagion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except experiments.RecipeError as exc:
        print(f"feedcontagion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, GraphError) as exc:
        print(f"feedcontagion: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

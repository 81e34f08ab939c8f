"""Command-line entry point: ``snmcache <command> [options]``.

Every command writes its tables (CSV), optional charts (SVG) and a
``manifest.json`` describing inputs, seeds and library versions into the
output directory.  Failures print a JSON error document on stderr (and
write ``error.json`` when the output directory exists).

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
1 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import scenarios as sc
from .che import CheModel
from .config import CacheTopology, ConfigError, TrafficConfig
from .experiments import (model_curve, scaled_capacity, shuffle_study, simulate_allocations,
                          simulated_curve, tree_point)
from .fit import classification_rows, classify, estimate_stats, fit_config
from .network import solve_network
from .quadrature import QuadratureError
from .sim import (FilterPolicy, Replication, UnreachableTargetError, run_seeds, simulate_single,
                  simulate_tree, write_json, write_rows)
from .tracegen import RequestTrace, generate

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
OUT_ENV = "SNMCACHE_OUT"
CURVE_COLUMNS = ("capacity", "T_C_days", "p_hit", "p_hit_small_approx", "p_hit_large_asymptote")


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, args, command: str):
        self.args = args
        self.command = command
        root = args.out or os.environ.get(OUT_ENV) or "snmcache-out"
        self.out = Path(root)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "error.json").unlink(missing_ok=True)
        self.outputs: list[str] = []
        self.inputs: dict = {}
        self.seeds: dict = {}

    @property
    def csv(self) -> bool:
        return self.args.format in ("csv", "both")

    @property
    def svg(self) -> bool:
        return self.args.format in ("svg", "both")

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def table(self, name: str, rows, columns) -> None:
        # tables are always written; they are the primary artifact
        write_rows(self.path(name), rows, columns)

    def chart(self, name: str, *args, **kwargs) -> None:
        if not self.svg:
            return
        from .plotting import line_chart
        line_chart(self.path(name), *args, **kwargs)

    def manifest(self, extra: dict | None = None) -> None:
        import matplotlib
        import numba
        import scipy
        files = []
        for name in self.outputs:
            p = self.out / name
            if p.exists():
                files.append({"path": name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
        doc = {
            "command": self.command,
            "arguments": {k: v for k, v in vars(self.args).items() if k != "func"},
            "inputs": self.inputs,
            "seeds": self.seeds,
            "versions": {"snmcache": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "numba": numba.__version__,
                         "matplotlib": matplotlib.__version__},
            "outputs": files,
        }
        if extra:
            doc.update(extra)
        write_json(self.out / "manifest.json", doc)


# -- input helpers ---------------------------------------------------------------

def _floats(text: str | None):
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _labels(text: str | None) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip()) if text else ()


def _load_config(args, required: bool = True, scaled: bool = True) -> TrafficConfig | None:
    if not args.config:
        if required:
            raise ConfigError("--config is required for this command")
        return None
    try:
        cfg = TrafficConfig.load(args.config)
    except FileNotFoundError:
        raise ConfigError(f"config file {args.config!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {args.config!r} is not valid JSON: {exc}") from None
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    if scaled and args.scale != 1.0:
        cfg = cfg.with_(gamma=cfg.gamma / args.scale)
    return cfg


def _load_topology(args) -> CacheTopology | None:
    if not args.topology:
        return None
    try:
        return CacheTopology.load(args.topology)
    except FileNotFoundError:
        raise ConfigError(f"topology file {args.topology!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"topology file {args.topology!r} is not valid JSON: {exc}") from None


def _load_trace(path: str) -> RequestTrace:
    try:
        return RequestTrace.from_csv(path)
    except FileNotFoundError:
        raise ConfigError(f"trace file {path!r} not found") from None


def _seed(args, default: int = 0) -> int:
    return default if args.seed is None else int(args.seed)


def _capacity_list(args, default) -> list:
    caps = _floats(getattr(args, "capacities", None))
    return [int(c) for c in caps] if caps else [int(c) for c in default]


# -- commands --------------------------------------------------------------------

def cmd_generate(args) -> None:
    run = Run(args, "generate")
    cfg = _load_config(args)
    topo = _load_topology(args)
    trace = generate(cfg, topo)
    name = "trace.csv.gz" if args.gzip else "trace.csv"
    trace.to_csv(run.path(name))
    run.inputs = {"config": cfg.to_dict(), "topology": topo.to_dict() if topo else None}
    run.seeds = {"trace": cfg.seed}
    run.manifest({"requests": len(trace), "measured_requests": trace.n_measured})


def cmd_simulate(args) -> None:
    run = Run(args, "simulate")
    topo = _load_topology(args)
    if topo is not None and args.scale != 1.0:
        topo = topo.with_capacities({n.id: scaled_capacity(n.capacity, args.scale) for n in topo.nodes})
    policy = FilterPolicy(_labels(args.filter))
    caps = [scaled_capacity(c, args.scale) for c in _capacity_list(args, [])]
    if topo is None and not caps:
        raise ConfigError("simulate needs --capacities or --topology")
    if args.trace:
        traces = [_load_trace(args.trace)]
        seeds = []
        run.inputs["trace"] = str(args.trace)
    else:
        cfg = _load_config(args)
        seeds = run_seeds(cfg.seed, args.reps) if args.reps > 1 else [cfg.seed]
        traces = (generate(cfg.with_(seed=s), topo) for s in seeds)
        run.inputs["config"] = cfg.to_dict()
    if topo is not None:
        run.inputs["topology"] = topo.to_dict()
    rows, ratios = [], []
    for i, trace in enumerate(traces):
        if topo is not None:
            res = [simulate_tree(trace, topo, policy)]
        else:
            res = [simulate_single(trace, c, policy) for c in caps]
        ratios.append([r.hit_ratio for r in res])
        for r in res:
            for row in r.rows():
                rows.append({"replication": i, **row})
            if topo is not None:
                rows.append({"replication": i, "node_id": "global", "capacity": topo.total_capacity,
                             "requests": r.requests, "hits": r.hits, "hit_ratio": r.hit_ratio})
    run.table("sim.csv", rows, ("replication", "node_id", "capacity", "requests", "hits", "hit_ratio"))
    summary = {"hit_ratio": np.mean(ratios, axis=0).tolist()}
    if len(ratios) > 1:
        summary["replication"] = Replication.of(ratios, seeds).to_dict()
    write_json(run.path("sim.json"), summary)
    run.seeds = {"replications": seeds}
    run.manifest()


def cmd_solve(args) -> None:
    run = Run(args, "solve")
    # the analytic model is cheap at any rate, so --scale is ignored here
    nominal = _load_config(args, scaled=False)
    topo = _load_topology(args)
    run.inputs = {"config": nominal.to_dict()}
    if topo is not None:
        run.inputs["topology"] = topo.to_dict()
        sol = solve_network(nominal, topo, args.scheme)
        rows = sol.rows() + [{"node_id": "global", "capacity": topo.total_capacity, "T_C_days": math.nan,
                              "requests": sol.request_rate, "hits": sol.request_rate * sol.global_hit_ratio,
                              "p_hit": sol.global_hit_ratio}]
        run.table("solve.csv", rows, ("node_id", "capacity", "T_C_days", "requests", "hits", "p_hit"))
        run.manifest()
        return
    model = CheModel(nominal.gamma, nominal.classes, filtered=_labels(args.filter), weighting=args.weighting)
    caps = _capacity_list(args, sc.capacity_grid(10, 1e6, 25))
    rows = model.curve(caps)
    run.table("solve.csv", rows, CURVE_COLUMNS)
    from .plotting import Series
    run.chart("solve.svg", [Series("model", [r["p_hit"] for r in rows], caps),
                            Series("small-cache approx.", [r["p_hit_small_approx"] for r in rows], caps,
                                   style="dashed", extra={"group": "model"})],
              "hit probability", "cache size (contents)", logy=True)
    run.manifest()


def cmd_fit(args) -> None:
    run = Run(args, "fit")
    if not args.trace:
        raise ConfigError("fit needs --trace")
    trace = _load_trace(args.trace)
    cfg = fit_config(trace, profile_kind=args.profile, seed=_seed(args))
    part = classify(estimate_stats(trace))
    cfg.dump(run.path("fitted_config.json"))
    run.table("classes.csv", classification_rows(part),
              ("class", "rule", "pct_reqs", "pct_videos", "mean_life_span", "mean_volume", "contents"))
    run.inputs = {"trace": str(args.trace)}
    run.manifest()


def cmd_shuffle(args) -> None:
    run = Run(args, "shuffle-study")
    if args.trace:
        trace = _load_trace(args.trace)
        run.inputs["trace"] = str(args.trace)
    else:
        cfg = _load_config(args, required=False)
        if cfg is None:
            cfg = sc.single_class_config(7.0, 3.0, "exponential", horizon=30.0, scale=args.scale * 10,
                                         seed=_seed(args))
        trace = generate(cfg)
        run.inputs["config"] = cfg.to_dict()
    hours = _floats(args.slice_hours) or [math.inf, 24.0 * 7, 24.0, 6.0, 1.0]
    targets = _floats(args.targets) or [0.1, 0.2, 0.3]
    reps = max(args.reps, 2)
    rows = shuffle_study(trace, hours, targets, reps=reps, seed=_seed(args))
    run.table("shuffle.csv", rows, ("slice_hours", "slices", "target", "capacity_mean", "ci_half_width"))
    from .plotting import Series
    series = []
    for h in [0.0] + hours:
        sel = [r for r in rows if r["slice_hours"] == h]
        label = "original" if h == 0 else ("K=1" if math.isinf(h) else f"{h:g} h slices")
        series.append(Series(label, [r["target"] for r in sel], [r["capacity_mean"] for r in sel],
                             style="line" if h == 0 else "dashed"))
    run.chart("shuffle.svg", series, "hit probability", "required cache size (contents)", logy=True)
    run.seeds = {"shuffle": run_seeds(_seed(args), reps)}
    run.manifest()


def cmd_sweep(args) -> None:
    if args.preset:
        return PRESETS[args.preset](args)
    run = Run(args, "sweep")
    cfg = _load_config(args)
    caps = _capacity_list(args, sc.capacity_grid(100, 1e5, 10))
    filtered = _labels(args.filter)
    rows = _curve_rows(cfg, caps, args, filtered)
    run.table("sweep.csv", rows, _SWEEP_COLUMNS)
    _chart_curves(run, "sweep.svg", {"config": rows})
    run.inputs = {"config": cfg.to_dict()}
    run.seeds = {"replications": run_seeds(cfg.seed, args.reps) if args.reps else []}
    run.manifest()


_SWEEP_COLUMNS = ("curve", "capacity", "T_C_days", "p_hit", "p_hit_small_approx", "p_hit_large_asymptote",
                  "sim_capacity", "p_hit_sim", "ci_half_width")


def _curve_rows(cfg: TrafficConfig, caps, args, filtered=(), label: str = "") -> list[dict]:
    rows = model_curve(cfg, caps, filtered=filtered, scale=args.scale)
    if args.reps > 0:
        sims = simulated_curve(cfg, caps, args.reps, filtered=filtered, scale=args.scale)
        for r, s in zip(rows, sims):
            r.update(s)
    for r in rows:
        r["curve"] = label
    return rows


def _chart_curves(run: Run, name: str, curves: dict, title: str = "") -> None:
    from .plotting import Series
    series = []
    for label, rows in curves.items():
        series.append(Series(f"{label} model", [r["p_hit"] for r in rows], [r["capacity"] for r in rows],
                             style="dotted", extra={"group": label}))
        if "p_hit_sim" in rows[0]:
            series.append(Series(f"{label} sim", [r["p_hit_sim"] for r in rows], [r["capacity"] for r in rows],
                                 xerr=[r["ci_half_width"] for r in rows], style="marker", extra={"group": label}))
    run.chart(name, series, "hit probability", "cache size (contents)", title=title, logy=True)


def cmd_fig6(args) -> None:
    run = Run(args, "fig6")
    seed = _seed(args)
    curves_a, curves_b, curves_c = {}, {}, {}
    caps = sc.capacity_grid(100, 3e5, 12)
    for L in sc.FIG6_LIFE_SPANS:
        cfg = sc.single_class_config(L, 3.0, scale=args.scale, seed=seed, horizon=args.horizon)
        curves_a[f"L={L:g}d"] = _curve_rows(cfg, caps, args, label=f"L={L:g}d")
        run.inputs[f"a/L={L:g}"] = cfg.to_dict()
    for beta in sc.FIG6_BETAS:
        cfg = sc.single_class_config(7.0, beta, scale=args.scale, seed=seed, horizon=args.horizon)
        curves_b[f"beta={beta:g}"] = _curve_rows(cfg, caps, args, label=f"beta={beta:g}")
        run.inputs[f"b/beta={beta:g}"] = cfg.to_dict()
    for beta in sc.FIG6_MODEL_BETAS:
        cfg = sc.single_class_config(7.0, beta, scale=args.scale, seed=seed, horizon=args.horizon)
        curves_c[f"beta={beta:g}"] = model_curve(cfg, caps, scale=args.scale)
        for r in curves_c[f"beta={beta:g}"]:
            r["curve"] = f"beta={beta:g}"
    for tag, curves in (("a", curves_a), ("b", curves_b), ("c", curves_c)):
        rows = [r for rs in curves.values() for r in rs]
        run.table(f"fig6{tag}.csv", rows, _SWEEP_COLUMNS)
        _chart_curves(run, f"fig6{tag}.svg", curves)
    run.seeds = {"replications": run_seeds(seed, args.reps) if args.reps else []}
    run.manifest({"scale": args.scale})


def cmd_fig7(args) -> None:
    run = Run(args, "fig7")
    seed = _seed(args)
    caps = sc.capacity_grid(100, 1e7, 16)
    scen = {}
    for n in sorted(sc.MIX_WEIGHTS):
        cfg = sc.mix_scenario(n, scale=args.scale, seed=seed, horizon=args.horizon)
        scen[f"Scenario {n}"] = _curve_rows(cfg, caps, args, label=f"Scenario {n}")
        run.inputs[f"scenario{n}"] = cfg.to_dict()
    filt = {}
    cfg3 = sc.mix_scenario(3, scale=args.scale, seed=seed, horizon=args.horizon)
    for name, labels in sc.FILTERS.items():
        filt[name] = _curve_rows(cfg3, caps, args, filtered=labels, label=name)
    run.table("fig7a.csv", [r for rs in scen.values() for r in rs], _SWEEP_COLUMNS)
    run.table("fig7b.csv", [r for rs in filt.values() for r in rs], _SWEEP_COLUMNS)
    _chart_curves(run, "fig7a.svg", scen)
    _chart_curves(run, "fig7b.svg", filt)
    req = []
    for name, labels in sc.FILTERS.items():
        model = CheModel(cfg3.gamma * args.scale, cfg3.classes, filtered=labels)
        for target in (0.05, 0.1, 0.2, 0.3):
            try:
                cap = model.required_capacity(target)
            except ValueError:
                cap = math.inf
            req.append({"policy": name, "target": target, "required_capacity": cap})
    run.table("fig7b_required.csv", req, ("policy", "target", "required_capacity"))
    run.seeds = {"replications": run_seeds(seed, args.reps) if args.reps else []}
    run.manifest({"scale": args.scale})


def cmd_fig8(args) -> None:
    run = Run(args, "fig8")
    seed = _seed(args)
    rows = []
    for localized in (False, True):
        name = "localized" if localized else "unlocalized"
        cfg = sc.tree_config(localized, scale=args.scale, seed=seed, horizon=args.horizon)
        run.inputs[name] = cfg.to_dict()
        points = [(tot, f) for tot in sc.TREE_TOTALS for f in sc.TREE_LEAF_FRACTIONS]
        nominal = [sc.tree_allocation(tot, f) for tot, f in points]
        scaled = [sc.tree_allocation(tot, f, scale=args.scale) for tot, f in points]
        sims = simulate_allocations(cfg, scaled, args.reps, base_seed=seed) if args.reps > 1 else None
        for i, ((tot, f), topo) in enumerate(zip(points, nominal)):
            leaf = topo.node("leaf0").capacity
            row = {"scenario": name, "alloc_label": f"{tot}/{f:g}", "total": tot, "leaf_fraction": f,
                   "leaf_capacity": leaf, "root_capacity": topo.node("root").capacity,
                   "global_phit_model": tree_point(cfg, topo, args.scale),
                   "global_phit_poisson": tree_point(cfg, topo, args.scale, scheme="poisson")}
            if sims is not None:
                row["global_phit_sim"] = float(sims.mean[i])
                row["ci"] = float(sims.half_width[i])
            rows.append(row)
    run.table("fig8.csv", rows, ("scenario", "alloc_label", "total", "leaf_fraction", "leaf_capacity",
                                 "root_capacity", "global_phit_model", "global_phit_poisson", "global_phit_sim",
                                 "ci"))
    from .plotting import Series
    for name in ("unlocalized", "localized"):
        series = []
        for tot in sc.TREE_TOTALS:
            sel = [r for r in rows if r["scenario"] == name and r["total"] == tot]
            fr = [r["leaf_fraction"] for r in sel]
            series.append(Series(f"C={tot}", fr, [r["global_phit_model"] for r in sel], extra={"group": tot}))
            if "global_phit_sim" in sel[0]:
                series.append(Series(f"C={tot} sim", fr, [r["global_phit_sim"] for r in sel],
                                     yerr=[r["ci"] for r in sel], style="marker", extra={"group": tot}))
        run.chart(f"fig8_{name}.svg", series, "fraction of capacity at the leaves", "global hit probability")
    run.seeds = {"replications": run_seeds(seed, args.reps) if args.reps > 1 else []}
    run.manifest({"scale": args.scale})


PRESETS = {"fig6": cmd_fig6, "fig7": cmd_fig7, "fig8": cmd_fig8}


# -- parser ----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, reps: int = 0, scale: float = 1.0) -> None:
    p.add_argument("--config", help="traffic configuration (JSON)")
    p.add_argument("--topology", help="cache topology (JSON)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./snmcache-out)")
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config seed)")
    p.add_argument("--reps", type=int, default=reps, help="simulation replications (0 = model only)")
    p.add_argument("--scale", type=float, default=scale,
                   help="divide arrival rate and cache sizes by this factor for simulation")
    p.add_argument("--format", choices=("csv", "svg", "both"), default="both", help="artifacts to write")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snmcache", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a request trace from a traffic config")
    _common(p)
    p.add_argument("--gzip", action="store_true", help="write trace.csv.gz")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="replay a trace through LRU caches")
    _common(p, reps=1)
    p.add_argument("--trace", help="trace CSV (instead of generating from --config)")
    p.add_argument("--capacities", help="comma-separated single-cache sizes")
    p.add_argument("--filter", help="comma-separated class labels never admitted")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve", help="analytic hit probability curve or tree solution")
    _common(p)
    p.add_argument("--capacities", help="comma-separated cache sizes")
    p.add_argument("--filter", help="comma-separated class labels never admitted")
    p.add_argument("--weighting", choices=("request", "content"), default="request")
    p.add_argument("--scheme", choices=("improved", "poisson"), default="improved")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("fit", help="fit a multi-class traffic config to a trace")
    _common(p)
    p.add_argument("--trace", help="trace CSV")
    p.add_argument("--profile", choices=("uniform", "exponential", "powerlaw"), default="exponential")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("shuffle-study", help="required cache size after K-slice shuffling")
    _common(p, reps=3)
    p.add_argument("--trace", help="trace CSV (default: a generated single-class trace)")
    p.add_argument("--slice-hours", help="comma-separated slice durations in hours; inf = one slice")
    p.add_argument("--targets", help="comma-separated target hit ratios")
    p.set_defaults(func=cmd_shuffle)

    p = sub.add_parser("sweep", help="model and simulated hit ratio over cache sizes")
    _common(p, reps=3)
    p.add_argument("preset", nargs="?", choices=sorted(PRESETS), help="run a figure preset instead")
    p.add_argument("--capacities", help="comma-separated cache sizes")
    p.add_argument("--filter", help="comma-separated class labels never admitted")
    p.add_argument("--horizon", type=float, default=sc.DESK_HORIZON, help="measured window (days)")
    p.set_defaults(func=cmd_sweep)

    for name, scale, help_ in (("fig6", 1.0, "single-class curves (life-span and volume skew)"),
                               ("fig7", 10.0, "multi-class scenarios and class filters"),
                               ("fig8", 1.0, "two-level tree, leaf versus root allocation")):
        p = sub.add_parser(name, help=help_)
        _common(p, reps=3, scale=scale)
        p.add_argument("--horizon", type=float, default=sc.DESK_HORIZON, help="measured window (days)")
        p.set_defaults(func=PRESETS[name])
    return parser


def _error(kind: str, exc: BaseException, code: int, out: str | None) -> int:
    doc = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    text = json.dumps(doc, sort_keys=True)
    print(text, file=sys.stderr)
    if out and Path(out).is_dir():
        (Path(out) / "error.json").write_text(text + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = args.out or os.environ.get(OUT_ENV)
    try:
        if args.scale <= 0:
            raise ConfigError("--scale must be positive")
        args.func(args)
    except (QuadratureError, UnreachableTargetError, ArithmeticError) as exc:
        return _error("numerical", exc, EXIT_NUMERIC, out)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        return _error("config", exc, EXIT_CONFIG, out)
    except Exception as exc:  # noqa: BLE001
        return _error("internal", exc, EXIT_OTHER, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

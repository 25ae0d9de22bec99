"""Batch command-line front end.

Exit codes: 0 success, 2 usage or config error, 1 runtime failure. Every
subcommand writes a run manifest next to its primary output; `rerun` replays
a manifest and reproduces the output byte for byte. All randomness flows from
explicit seed flags or config fields.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data_ingest import daily_deltas, filter_regions, load_case_series, rank_timeline, write_timeline_csv
from .experiments import (
    ConfigError,
    hit_curve_rows,
    hit_vs_correlation,
    compare_observables,
    load_experiment_file,
    run_hit_experiment,
    sweep_decay_parameter,
    write_correlation_csv,
    write_hit_curves_csv,
    write_sweep_csv,
)
from .network import Network, generate_erdos_renyi, hop_distances, load_adjacency, save_adjacency
from .profiler import DecayKind, DecaySpec, likeliness_scores, write_ranking_csv
from .simulator import (
    Dataset,
    EpidemicParams,
    InitialCondition,
    ObservableKind,
    simulate,
    write_trajectory_csv,
)


class UsageError(Exception):
    """Bad flags, bad config, or unusable input files (exit code 2)."""


def _manifest_path(out) -> Path:
    return Path(str(out) + ".manifest.json")


def _write_manifest(subcommand: str, arguments: dict, outputs: list[str]) -> None:
    manifest = {
        "tool": "epiprofiler",
        "version": __version__,
        "subcommand": subcommand,
        "arguments": arguments,
        "outputs": outputs,
    }
    path = _manifest_path(outputs[0])
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_input(path_text: str) -> str:
    path = Path(path_text)
    if not path.exists():
        raise UsageError(f"input file not found: {path}")
    return str(path.resolve())


def _decay_spec(decay: str, param) -> DecaySpec:
    try:
        kind = DecayKind(decay)
    except ValueError:
        raise UsageError(f"unknown decay kind {decay!r}") from None
    if kind is DecayKind.NAIVE:
        if param is not None:
            raise UsageError("--param is not accepted for the naive decay")
        return DecaySpec(kind)
    if param is None:
        raise UsageError(f"--param is required for the {kind.value} decay")
    try:
        return DecaySpec(kind, param)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _progress_printer(stream=None):
    stream = stream or sys.stderr
    def report(done: int, total: int) -> None:
        print(f"replicate {done}/{total}", file=stream)
    return report


def cmd_gen_net(args) -> int:
    try:
        if args.nodes < 2:
            raise UsageError(f"--nodes must be >= 2, got {args.nodes}")
        if not 0 < args.mean_degree < args.nodes:
            raise UsageError(
                f"--mean-degree must lie in (0, {args.nodes}), got {args.mean_degree}"
            )
        net = generate_erdos_renyi(args.nodes, args.mean_degree, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    save_adjacency(net, args.out)
    _write_manifest(
        "gen-net",
        {"nodes": args.nodes, "mean_degree": args.mean_degree, "seed": args.seed, "out": str(args.out)},
        [str(args.out)],
    )
    return 0


def cmd_simulate(args) -> int:
    try:
        net = load_adjacency(_resolve_input(args.net))
        params = EpidemicParams(args.alpha, args.beta, args.gamma)
        if args.source == "random":
            source = int(np.random.default_rng((args.seed, 0)).integers(net.n))
        elif args.source.lstrip("-").isdigit():
            source = int(args.source)
            if not 0 <= source < net.n:
                raise ValueError(f"--source {source} out of range for {net.n} nodes")
        else:
            raise ValueError(f"--source must be a node index or 'random', got {args.source!r}")
        init = InitialCondition(source, args.index_cases, args.population)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    traj = simulate(
        net,
        params,
        init,
        args.t_end,
        sim_dt=args.sim_dt,
        report_dt=args.report_dt,
        seed=(args.seed, 1),
        noise=not args.no_noise,
    )
    sidecar = write_trajectory_csv(traj, args.out)
    _write_manifest(
        "simulate",
        {
            "net": _resolve_input(args.net),
            "alpha": args.alpha,
            "beta": args.beta,
            "gamma": args.gamma,
            "source": str(source),
            "index_cases": args.index_cases,
            "population": args.population,
            "t_end": args.t_end,
            "sim_dt": args.sim_dt,
            "report_dt": args.report_dt,
            "seed": args.seed,
            "no_noise": args.no_noise,
            "out": str(args.out),
        },
        [str(args.out), str(sidecar)],
    )
    return 0


def _load_dataset_csv(path, net: Network) -> Dataset:
    import csv as _csv

    rows: dict[str, float] = {}
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["node_label", "value"]:
            raise ValueError(f"{path}: expected header 'node_label,value', got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: line {line_no}: expected 2 columns")
            label, text = row[0].strip(), row[1].strip()
            if label in rows:
                raise ValueError(f"{path}: line {line_no}: duplicate node {label!r}")
            try:
                rows[label] = float(text)
            except ValueError as exc:
                raise ValueError(f"{path}: line {line_no}: bad value {text!r}") from exc
    if sorted(rows) != sorted(net.labels):
        raise ValueError(f"{path}: node labels do not match the network's labels")
    return Dataset(np.array([rows[lab] for lab in net.labels]), ObservableKind.NEW_CASES)


def cmd_profile(args) -> int:
    try:
        net = load_adjacency(_resolve_input(args.net))
        data = _load_dataset_csv(_resolve_input(args.data), net)
        spec = _decay_spec(args.decay, args.param)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = likeliness_scores(hop_distances(net), data, spec)
    write_ranking_csv(result, net.labels, args.out)
    _write_manifest(
        "profile",
        {
            "net": _resolve_input(args.net),
            "data": _resolve_input(args.data),
            "decay": args.decay,
            "param": args.param,
            "out": str(args.out),
        },
        [str(args.out)],
    )
    if result.degenerate:
        print("note: observation vector is all zero; ranking is degenerate", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    try:
        exp_file = load_experiment_file(_resolve_input(args.config))
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    cfg = exp_file.config
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, master_seed=args.seed)
    progress = _progress_printer()
    if exp_file.experiment == "hit":
        curve = run_hit_experiment(cfg, workers=args.workers, progress=progress)
        write_hit_curves_csv(args.out, hit_curve_rows("hit", curve))
    elif exp_file.experiment == "correlation":
        samples = hit_vs_correlation(cfg, workers=args.workers, progress=progress)
        write_correlation_csv(args.out, "correlation", samples)
        print(f"skipped zero-variance samples: {samples.skipped}", file=sys.stderr)
    else:
        curves = compare_observables(cfg, workers=args.workers, progress=progress)
        rows = []
        for kind, curve in curves.items():
            rows.extend(hit_curve_rows(f"observables[{kind.value}]", curve))
        write_hit_curves_csv(args.out, rows)
    _write_manifest(
        "evaluate",
        {
            "config": _resolve_input(args.config),
            "seed": args.seed,
            "workers": args.workers,
            "out": str(args.out),
        },
        [str(args.out)],
    )
    return 0


def cmd_sweep(args) -> int:
    try:
        exp_file = load_experiment_file(_resolve_input(args.config))
        if exp_file.sweep_kind is None:
            raise UsageError(f"{args.config}: config has no 'sweep' block")
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    result = sweep_decay_parameter(
        exp_file.config,
        exp_file.sweep_kind,
        exp_file.sweep_grid,
        workers=args.workers,
        progress=_progress_printer(),
    )
    write_sweep_csv(args.out, "sweep", result)
    print(f"best {result.kind.value} parameter: {result.best_param:g}", file=sys.stderr)
    _write_manifest(
        "sweep",
        {"config": _resolve_input(args.config), "workers": args.workers, "out": str(args.out)},
        [str(args.out)],
    )
    return 0


def cmd_rank_timeline(args) -> int:
    try:
        net = load_adjacency(_resolve_input(args.net))
        series = load_case_series(_resolve_input(args.cases))
        series = filter_regions(series, min_cases=args.min_cases, window_days=args.window_days)
        param = args.param
        if param is None and args.decay == DecayKind.POLYNOMIAL.value:
            param = 0.5
        spec = _decay_spec(args.decay, param)
        datasets = daily_deltas(series, labels=net.labels)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    timeline = rank_timeline(net, datasets, spec, dates=series.dates[:-1])
    write_timeline_csv(timeline, args.out)
    _write_manifest(
        "rank-timeline",
        {
            "net": _resolve_input(args.net),
            "cases": _resolve_input(args.cases),
            "decay": args.decay,
            "param": param,
            "min_cases": args.min_cases,
            "window_days": args.window_days,
            "out": str(args.out),
        },
        [str(args.out)],
    )
    return 0


def _argv_from_arguments(arguments: dict) -> list[str]:
    argv = []
    for key, value in arguments.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif value is not None:
            argv.extend([flag, str(value)])
    return argv


def cmd_rerun(args) -> int:
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
        subcommand = manifest["subcommand"]
        arguments = dict(manifest["arguments"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from exc
    if args.out is not None:
        arguments["out"] = str(args.out)
    return main([subcommand] + _argv_from_arguments(arguments))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epiprofiler",
        description="Simulate multiregional outbreaks and profile their likely source node.",
    )
    parser.add_argument("--version", action="version", version=f"epiprofiler {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen-net", help="generate a random transport network CSV")
    p.add_argument("--nodes", type=int, required=True, help="node count (>= 2)")
    p.add_argument("--mean-degree", type=float, required=True, help="expected degree, in (0, nodes)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--out", required=True, help="output adjacency CSV path")
    p.set_defaults(func=cmd_gen_net)

    p = sub.add_parser("simulate", help="run one stochastic outbreak simulation")
    p.add_argument("--net", required=True, help="adjacency CSV")
    p.add_argument("--alpha", type=float, required=True, help="infection rate (1/time)")
    p.add_argument("--beta", type=float, required=True, help="removal rate (1/time)")
    p.add_argument("--gamma", type=float, required=True, help="total mobility rate (1/time)")
    p.add_argument("--source", default="random", help="source node index, or 'random'")
    p.add_argument("--index-cases", type=float, default=20.0, help="initial cases at the source")
    p.add_argument("--population", type=float, default=1e8, help="total population over all nodes")
    p.add_argument("--t-end", type=float, required=True, help="simulation horizon")
    p.add_argument("--sim-dt", type=float, default=0.05, help="integration step")
    p.add_argument("--report-dt", type=float, default=1.0, help="reporting interval")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--no-noise", action="store_true", help="deterministic drift-only integration")
    p.add_argument("--out", required=True, help="output trajectory CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("profile", help="rank candidate sources for one observation CSV")
    p.add_argument("--net", required=True, help="adjacency CSV")
    p.add_argument("--data", required=True, help="observation CSV with header node_label,value")
    p.add_argument("--decay", required=True, choices=[k.value for k in DecayKind])
    p.add_argument("--param", type=float, default=None, help="decay parameter (not for naive)")
    p.add_argument("--out", required=True, help="output ranking CSV path")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("evaluate", help="run an ensemble experiment from a JSON config")
    p.add_argument("--config", required=True, help="experiment JSON config")
    p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    p.add_argument("--workers", type=int, default=1, help="parallel replicate workers")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="sweep a decay parameter grid from a JSON config")
    p.add_argument("--config", required=True, help="experiment JSON config with a 'sweep' block")
    p.add_argument("--workers", type=int, default=1, help="parallel replicate workers")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rank-timeline", help="day-by-day source ranking from cumulative case reports")
    p.add_argument("--net", required=True, help="adjacency CSV")
    p.add_argument("--cases", required=True, help="case CSV with header date,region,cumulative_cases")
    p.add_argument("--decay", default="polynomial", choices=[k.value for k in DecayKind])
    p.add_argument("--param", type=float, default=None,
                   help="decay parameter (default 0.5 for polynomial; not for naive)")
    p.add_argument("--min-cases", type=int, default=5, help="region filter threshold")
    p.add_argument("--window-days", type=int, default=31, help="region filter window")
    p.add_argument("--out", required=True, help="output timeline CSV path")
    p.set_defaults(func=cmd_rank_timeline)

    p = sub.add_parser("rerun", help="replay a run manifest, reproducing its outputs")
    p.add_argument("--manifest", required=True, help="manifest JSON written by a previous run")
    p.add_argument("--out", default=None, help="redirect the primary output path")
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

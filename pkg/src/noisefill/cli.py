"""Command-line front end.

Verbs: ``allocate`` (solve one instance from a channels CSV), ``sweep``
(budget sweep on a sampled instance), ``convexity`` (certificate scan for
a model), ``attack`` (success-rate study of allocators against the
simulated attack), and ``trace-gen`` (write a synthetic trace file).

Every verb reads a flat JSON config (``--config``), writes one output
file (``--out``), and derives all randomness from one master seed
(``--seed`` overrides the config's seed), so reruns with the same inputs
produce byte-identical outputs.  Exit codes: 0 success, 2 config error,
3 input/output error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .allocators import SolveOptions, SolverError, make_solver, write_allocation_csv
from .channels import read_channels_csv
from .convexity import UnsupportedModelError, check_c1, check_c3, convexity_boundary
from .evaluation import (
    UnreachableTargetError,
    evaluate,
    run_sweep,
    sample_instance,
    write_sweep_csv,
)
from .inputs import QuadratureError, make_model
from .sca import (
    AttackConfig,
    TraceFormatError,
    attack_channels,
    generate_traces,
    mia_attack,
    read_traces,
    success_rate,
    write_traces,
)

__all__ = ["main", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    """The run configuration is missing a field or holds a bad value."""


def _load_config(path) -> dict:
    if path is None:
        raise ConfigError("this command requires --config")
    try:
        with open(path, "r") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _require(cfg: dict, key: str, context: str):
    if key not in cfg:
        raise ConfigError(f"{context} requires config field {key!r}")
    return cfg[key]


def _model_from_config(cfg: dict):
    kind = cfg.get("model", "gaussian")
    try:
        if kind == "tabulated":
            return make_model(kind, _require(cfg, "table", "tabulated model"))
        return make_model(kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _solver_from_config(cfg: dict, model):
    name = _require(cfg, "solver", "allocate")
    alpha = cfg.get("alpha")
    if name == "sibson" and alpha is None:
        raise ConfigError("sibson solver requires config field 'alpha'")
    try:
        return make_solver(name, model=model, alpha=alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _seed_of(cfg: dict, args) -> int:
    if args.seed is not None:
        return args.seed
    seed = cfg.get("seed")
    if seed is None:
        raise ConfigError("config must set 'seed' (or pass --seed)")
    return int(seed)


def _budgets_from_config(cfg: dict, context: str):
    if "budgets" in cfg:
        budgets = [float(b) for b in cfg["budgets"]]
    else:
        lo = float(_require(cfg, "budget_min", context))
        hi = float(_require(cfg, "budget_max", context))
        num = int(_require(cfg, "budget_count", context))
        if num < 2 or hi < lo:
            raise ConfigError("need budget_max >= budget_min and budget_count >= 2")
        budgets = list(np.linspace(lo, hi, num))
    if any(b < 0 or not math.isfinite(b) for b in budgets):
        raise ConfigError("budgets must be finite and nonnegative")
    return budgets


def cmd_allocate(args) -> int:
    cfg = _load_config(args.config)
    channels = read_channels_csv(_require(cfg, "channels", "allocate"))
    model = _model_from_config(cfg)
    solver = _solver_from_config(cfg, model)
    budget = float(_require(cfg, "budget", "allocate"))
    if budget < 0 or not math.isfinite(budget):
        raise ConfigError("budget must be finite and nonnegative")
    alloc = solver(channels, budget)
    write_allocation_csv(channels, alloc, model, args.out)
    report = evaluate(channels, alloc, model, alphabet_size=int(cfg.get("alphabet_size", 256)))
    dual = "none" if alloc.dual is None else f"{float(alloc.dual)!r}"
    print(
        f"allocated {float(alloc.budget_used)!r} of {budget!r} "
        f"(objective={alloc.objective_kind} dual={dual})"
    )
    print(
        f"total_mi={float(report.total_mi)!r} max_mi={float(report.max_mi)!r} "
        f"fano_pe_lower={float(report.fano_pe_lower)!r}"
    )
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    seed = _seed_of(cfg, args)
    channels = sample_instance(
        m=int(_require(cfg, "m", "sweep")),
        z=float(_require(cfg, "z", "sweep")),
        p_dist=cfg.get("p_dist", "gaussian"),
        seed=seed,
        p_mean=float(cfg.get("p_mean", 1.0)),
        p_std=float(cfg.get("p_std", 0.5)),
        p_low=float(cfg.get("p_low", 0.0)),
        p_high=float(cfg.get("p_high", 2.0)),
    )
    model = _model_from_config(cfg)
    budgets = _budgets_from_config(cfg, "sweep")
    solver_total = make_solver("gaussian_total")
    solver_max = make_solver("minimax")
    baseline = make_solver("uniform")

    def one_budget(budget):
        return run_sweep(
            channels, [budget], model, solver_total, solver_max, baseline,
            alphabet_size=int(cfg.get("alphabet_size", 256)),
        )[0]

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        rows = list(pool.map(one_budget, budgets))
    write_sweep_csv(rows, args.out)
    print(f"swept {len(rows)} budgets on m={channels.m} (seed {seed})")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_convexity(args) -> int:
    if args.model == "tabulated":
        if args.table is None:
            raise ConfigError("tabulated model requires --table")
        model = make_model("tabulated", args.table)
    else:
        try:
            model = make_model(args.model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if not (0 < args.rho_min < args.rho_max) or args.points < 2:
        raise ConfigError("need 0 < rho-min < rho-max and points >= 2")
    grid = np.geomspace(args.rho_min, args.rho_max, args.points)
    with open(args.out, "w", newline="\n") as fh:
        fh.write("rho,c1_margin,c3_value\n")
        for rho in grid:
            c1 = check_c1(model, float(rho))
            try:
                c3 = check_c3(model, float(rho))
            except UnsupportedModelError:
                c3 = math.nan
            fh.write(f"{float(rho)!r},{c1!r},{c3!r}\n")
    boundary = convexity_boundary(model, args.rho_min, args.rho_max)
    if boundary is None:
        print(f"no convexity sign change in [{args.rho_min}, {args.rho_max}]")
    else:
        print(f"convexity margin changes sign near snr {boundary:.4f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _attack_config(cfg: dict, seed: int) -> AttackConfig:
    return AttackConfig(
        m=int(cfg.get("m", 1000)),
        n_traces=int(cfg.get("n_traces", 512)),
        leak_points=tuple(int(i) for i in _require(cfg, "leak_points", "attack scenario")),
        p_leak=float(_require(cfg, "p_leak", "attack scenario")),
        bg_mean=float(cfg.get("bg_mean", 0.002)),
        bg_std=float(cfg.get("bg_std", 0.001)),
        z=float(_require(cfg, "z", "attack scenario")),
        true_key=int(cfg.get("true_key", 0x53)),
        n_bins=int(cfg.get("n_bins", 9)),
        seed=seed,
    )


def cmd_attack(args) -> int:
    cfg = _load_config(args.config)
    if "traces" in cfg:
        # Replay mode: attack a recorded trace file instead of simulating.
        traces = read_traces(cfg["traces"])
        result = mia_attack(traces, n_bins=int(cfg.get("n_bins", 9)))
        with open(args.out, "w", newline="\n") as fh:
            fh.write("best_key_hex,best_point,success\n")
            fh.write(
                f"{format(result.best_key, '02x')},{result.best_point},"
                f"{str(result.success).lower()}\n"
            )
        print(f"replayed {cfg['traces']}: best key 0x{result.best_key:02x}")
        print(f"wrote {args.out}")
        return EXIT_OK
    seed = _seed_of(cfg, args)
    config = _attack_config(cfg, seed)
    budgets = _budgets_from_config(cfg, "attack")
    names = cfg.get("allocators", ["uniform", "gaussian_total", "minimax"])
    model = _model_from_config(cfg)
    solvers = []
    for name in names:
        try:
            solvers.append(make_solver(name, model=model, alpha=cfg.get("alpha")))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    n_seeds = int(cfg.get("n_seeds", 20))

    def one_budget(task):
        index, budget = task
        return [
            success_rate(config, solver, budget, n_seeds, run_key=(index,))
            for solver in solvers
        ]

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        rates = list(pool.map(one_budget, enumerate(budgets)))
    with open(args.out, "w", newline="\n") as fh:
        fh.write("N0," + ",".join(names) + "\n")
        for budget, row in zip(budgets, rates):
            fh.write(f"{budget!r}," + ",".join(repr(r) for r in row) + "\n")
    print(f"attacked {len(budgets)} budgets x {len(names)} allocators, {n_seeds} seeds each")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_trace_gen(args) -> int:
    cfg = _load_config(args.config)
    seed = _seed_of(cfg, args)
    if "channels" in cfg:
        channels = read_channels_csv(cfg["channels"])
        leak_points = tuple(int(i) for i in _require(cfg, "leak_points", "trace-gen"))
        true_key = int(cfg.get("true_key", 0x53))
        n_traces = int(cfg.get("n_traces", 512))
    else:
        config = _attack_config(cfg, seed)
        channels = attack_channels(config)
        leak_points = config.leak_points
        true_key = config.true_key
        n_traces = config.n_traces
    fmt = cfg.get("format", "text")
    if fmt not in ("text", "binary"):
        raise ConfigError(f"unknown trace format {fmt!r}")
    traces = generate_traces(channels, leak_points, true_key, n_traces, seed=(seed, "trace-gen"))
    write_traces(traces, args.out, fmt)
    print(f"wrote {n_traces} traces of {channels.m} samples to {args.out} ({fmt})")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    common.add_argument("--out", required=True, help="output file path")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps/attacks")

    parser = argparse.ArgumentParser(
        prog="noisefill",
        description="Masking-noise budget allocation and side-channel leakage evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("allocate", parents=[common], help="solve one instance from a channels CSV")
    sub.add_parser("sweep", parents=[common], help="budget sweep on a sampled instance")
    conv = sub.add_parser("convexity", parents=[common], help="certificate scan for a model")
    conv.add_argument("--model", default="gaussian", help="input model kind")
    conv.add_argument("--table", default=None, help="CSV table for tabulated models")
    conv.add_argument("--rho-min", type=float, default=0.1)
    conv.add_argument("--rho-max", type=float, default=10.0)
    conv.add_argument("--points", type=int, default=50)
    sub.add_parser("attack", parents=[common], help="success-rate study of allocators")
    sub.add_parser("trace-gen", parents=[common], help="write a synthetic trace file")
    return parser


_COMMANDS = {
    "allocate": cmd_allocate,
    "sweep": cmd_sweep,
    "convexity": cmd_convexity,
    "attack": cmd_attack,
    "trace-gen": cmd_trace_gen,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, QuadratureError, UnreachableTargetError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, TraceFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # Domain validation on file contents (bad powers, headers, tables).
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

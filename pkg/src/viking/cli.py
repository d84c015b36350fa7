"""Command-line interface.

Subcommands: ``simulate`` (dataset to CSV), ``filter`` (dataset CSV plus
config to trace CSV), ``experiment`` (named experiment end to end),
``sweep-nmc``, and ``grid`` (rho grid search). A ``--config`` file supplies
``key = value`` defaults that explicit flags override. Exit codes: 0 on
success, 1 on usage errors, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .datagen import read_dataset_csv, write_dataset_csv
from .harness import (
    DEFAULT_RHO_GRID,
    ExperimentConfig,
    ExperimentKind,
    InitOverrides,
    Method,
    QShape,
    Setting,
    grid_points,
    make_dataset,
    parse_config_file,
    run_cell,
    run_experiment,
    sweep_nmc,
    transition_for,
)
from .linalg import SingularMatrixError
from .records import write_trace_csv


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="key = value config file")
    common.add_argument("--seed", type=int, default=None, help="single seed")
    common.add_argument("--seeds", type=str, default=None, help="comma list or a..b range")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--experiment", type=str, default=None,
                        help="resonator | ws-iid | ws-noniid | ms-iid | ms-noniid")
    common.add_argument("--method", type=str, default=None,
                        help="viking | kalman-oracle | kalman-constant")
    common.add_argument("--setting", type=str, default=None, help="scalar | diagonal")
    common.add_argument("--n", type=int, default=None)
    common.add_argument("--n-mc", type=int, default=None)
    common.add_argument("--rho-a", type=float, default=None)
    common.add_argument("--rho-b", type=float, default=None)

    parser = _Parser(prog="viking", description="adaptive state-space forecasting experiments")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("simulate", parents=[common], help="generate a dataset CSV")
    filt = sub.add_parser("filter", parents=[common], help="run a filter over a dataset CSV")
    filt.add_argument("--data", type=str, default=None, help="dataset CSV path")
    sub.add_parser("experiment", parents=[common], help="run a named experiment end to end")
    sweep = sub.add_parser("sweep-nmc", parents=[common], help="Monte-Carlo sample-count sweep")
    sweep.add_argument("--nmc-list", type=str, default=None, help="comma list, must contain 1")
    sub.add_parser("grid", parents=[common], help="rho grid search for the adaptive filter")
    return parser


def _parse_seeds(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(",") if part.strip())


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


class _Options:
    """Config-file values overridden by explicit flags."""

    def __init__(self, args: argparse.Namespace):
        self.file: dict[str, str] = {}
        if getattr(args, "config", None):
            self.file = parse_config_file(args.config)
        self.args = args

    def get(self, key: str, parse=str, default=None):
        flag_value = getattr(self.args, key, None)
        if flag_value is not None:
            return flag_value
        if key in self.file:
            return parse(self.file[key])
        return default


def _seeds_from(opts: _Options, default: tuple[int, ...]) -> tuple[int, ...]:
    if opts.args.seed is not None:
        return (opts.args.seed,)
    raw = opts.get("seeds", parse=_parse_seeds)
    if raw is not None:
        return raw if isinstance(raw, tuple) else _parse_seeds(raw)
    if "seed" in opts.file:
        return (int(opts.file["seed"]),)
    return default


def _build_config(opts: _Options, *, seeds_default=(1,), method_default="viking") -> ExperimentConfig:
    experiment = opts.get("experiment", default="ws-iid")
    method = opts.get("method", default=method_default)
    setting = opts.get("setting", default="diagonal")
    try:
        experiment = ExperimentKind(experiment)
        method = Method(method)
        setting = Setting(setting)
    except ValueError as exc:
        raise UsageError(str(exc))
    init = InitOverrides(
        a0=opts.get("a0", parse=float, default=0.0),
        s0=opts.get("s0", parse=float, default=0.1),
        q0=opts.get("q0", parse=float),
        sigma0=opts.get("sigma0", parse=float),
        p0=opts.get("p0", parse=float, default=1.0),
    )
    q_shape = opts.get("q_shape", default="both")
    q_shapes = (QShape.MASKED, QShape.FULL) if q_shape == "both" else (QShape(q_shape),)
    q_grid = opts.get("q_grid", parse=lambda s: tuple(float(v) for v in s.split(",")))
    cfg = ExperimentConfig(
        experiment=experiment,
        method=method,
        setting=setting,
        n=opts.get("n", parse=int, default=1000),
        seeds=_seeds_from(opts, seeds_default),
        rho_a=opts.get("rho_a", parse=float),
        rho_b=opts.get("rho_b", parse=float),
        n_mc=opts.get("n_mc", parse=int, default=10),
        n_iter=opts.get("n_iter", parse=int, default=2),
        learn_a=opts.get("learn_a", parse=_parse_bool),
        learn_b=opts.get("learn_b", parse=_parse_bool),
        sigma2_const=opts.get("sigma2_const", parse=float, default=1.0),
        init=init,
        walk_var=opts.get("walk_var", parse=float, default=1e-3),
    )
    if q_grid is not None:
        cfg.q_grid = q_grid
    cfg.q_shapes = q_shapes
    return cfg


def _out_dir(opts: _Options) -> Path:
    out = Path(opts.get("out", default="out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(opts: _Options) -> int:
    cfg = _build_config(opts)
    out = _out_dir(opts)
    for seed in cfg.seeds:
        ds = make_dataset(cfg, seed)
        path = out / f"{cfg.experiment.value}-seed{seed}.csv"
        write_dataset_csv(ds, path)
        print(path)
    return 0


def _cmd_filter(opts: _Options) -> int:
    data = opts.get("data")
    if data is None:
        raise UsageError("filter requires --data <dataset csv>")
    cfg = _build_config(opts)
    ds = read_dataset_csv(data)
    K = transition_for(cfg, ds.d)
    if K.shape[0] != ds.d:
        raise ValueError(f"dataset dimension {ds.d} does not match transition dimension {K.shape[0]}")
    seed = cfg.seeds[0]
    point = grid_points(cfg)[0]
    trace = run_cell(cfg, point, ds, seed)
    out = _out_dir(opts)
    path = out / f"trace-{cfg.method.value}-{cfg.setting.value}.csv"
    write_trace_csv(trace, path)
    print(path)
    return 0


def _cmd_experiment(opts: _Options) -> int:
    cfg = _build_config(opts, seeds_default=tuple(range(1, 21)))
    out = _out_dir(opts)
    summary = run_experiment(cfg, out_dir=out)
    row = summary.best_row
    print(f"{summary.experiment} {row.method}-{row.setting} [{row.grid}] "
          f"mse={row.mean_mse:.6g} stderr={row.stderr_mse:.3g}")
    return 0


def _cmd_sweep_nmc(opts: _Options) -> int:
    cfg = _build_config(opts, seeds_default=tuple(range(1, 21)))
    raw = opts.get("nmc_list", default="1,2,5,10,20")
    nmc_list = [int(v) for v in str(raw).split(",")]
    out = _out_dir(opts)
    rows = sweep_nmc(cfg, nmc_list, out_dir=out)
    for nmc, mean, ratio in rows:
        print(f"n_mc={nmc} mse={mean:.6g} ratio={ratio:.4g}")
    return 0


def _cmd_grid(opts: _Options) -> int:
    cfg = _build_config(opts, seeds_default=tuple(range(1, 11)))
    if cfg.method is not Method.VIKING:
        raise UsageError("grid search applies to the adaptive filter only")
    if opts.args.rho_a is None and "rho_a" not in opts.file:
        cfg.rho_a = DEFAULT_RHO_GRID
    if opts.args.rho_b is None and "rho_b" not in opts.file:
        cfg.rho_b = DEFAULT_RHO_GRID
    out = _out_dir(opts)
    summary = run_experiment(cfg, out_dir=out)
    row = summary.best_row
    print(f"best [{row.grid}] mse={row.mean_mse:.6g} stderr={row.stderr_mse:.3g}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "filter": _cmd_filter,
    "experiment": _cmd_experiment,
    "sweep-nmc": _cmd_sweep_nmc,
    "grid": _cmd_grid,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        return _COMMANDS[args.command](_Options(args))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SingularMatrixError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


def entrypoint() -> None:
    sys.exit(main())

"""Experiment runner: datasets, filter methods, grids, metrics, CSV output.

Five named experiments (a stochastic resonator plus well-specified and
misspecified regressions on i.i.d. / non-i.i.d. designs) are paired with
three methods: the adaptive filter, a Kalman oracle driven by the recorded
true variances, and constant-variance Kalman baselines over a grid of
state-noise levels. The score is the mean squared one-step forecast error
over the second half of each run; grid methods report every grid point and
select the best a posteriori by mean score across seeds.

Output layout: ``<out>/<experiment>/<method>-<setting>/seed<k>.csv`` per-seed
traces (for the selected grid point) plus ``summary.csv`` alongside them.
All randomness flows from the configured seeds; repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .datagen import (
    Dataset,
    DesignKind,
    DEFAULT_WALK_VAR,
    default_resonator_sigma2,
    gen_design,
    gen_misspecified,
    gen_resonator,
    gen_wellspecified,
    resonator_transition,
)
from .kalman import GaussianState, kalman_run
from .records import StepRecord, fmt, write_trace_csv
from .transforms import NoiseTransform
from .vb import VikingHyper, default_initial_state, viking_run

DEFAULT_RHO_GRID = tuple(math.exp(-i) for i in range(1, 11))
DEFAULT_Q_GRID = tuple(math.exp(-i) for i in range(1, 11))
RESONATOR_RHO_A = math.exp(-6.0)
MS_FILTER_CONTRACTION = 0.9


class ExperimentKind(Enum):
    RESONATOR = "resonator"
    WS_IID = "ws-iid"
    WS_NONIID = "ws-noniid"
    MS_IID = "ms-iid"
    MS_NONIID = "ms-noniid"


class Method(Enum):
    VIKING = "viking"
    KALMAN_ORACLE = "kalman-oracle"
    KALMAN_CONSTANT = "kalman-constant"


class Setting(Enum):
    SCALAR = "scalar"
    DIAGONAL = "diagonal"


class QShape(Enum):
    MASKED = "masked"  # q * diag(0,0,1,1,1)
    FULL = "full"      # q * I


@dataclass
class InitOverrides:
    """Initial beliefs; ``None`` fields resolve to per-experiment defaults."""

    a0: float = 0.0
    s0: float = 0.1
    q0: float | None = None      # initial state-noise diagonal, f(b0)
    sigma0: float | None = None  # initial latent covariance scale
    p0: float = 1.0


@dataclass
class ExperimentConfig:
    experiment: ExperimentKind
    method: Method
    setting: Setting = Setting.DIAGONAL
    n: int = 1000
    seeds: tuple[int, ...] = tuple(range(1, 21))
    rho_a: float | tuple[float, ...] | None = None
    rho_b: float | tuple[float, ...] | None = None
    n_mc: int = 10
    n_iter: int = 2
    learn_a: bool | None = None
    learn_b: bool | None = None
    q_grid: tuple[float, ...] = DEFAULT_Q_GRID
    q_shapes: tuple[QShape, ...] = (QShape.MASKED, QShape.FULL)
    sigma2_const: float = 1.0
    init: InitOverrides = field(default_factory=InitOverrides)
    walk_var: float = DEFAULT_WALK_VAR

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("need n >= 2 (the second-half metric needs at least one point)")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.q_grid or not self.q_shapes:
            raise ValueError("grids must be non-empty")


def mse_second_half(trace: list[StepRecord]) -> float:
    """Mean squared one-step forecast error over steps strictly past n/2."""
    n = len(trace)
    if n < 2:
        raise ValueError("trace must have length >= 2")
    resid = np.array([r.residual for r in trace[n // 2:]])
    return float(np.mean(resid * resid))


def make_dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    kind = cfg.experiment
    if kind is ExperimentKind.RESONATOR:
        return gen_resonator(cfg.n, default_resonator_sigma2(cfg.n), seed)
    design_kind = DesignKind.IID if kind in (ExperimentKind.WS_IID, ExperimentKind.MS_IID) else DesignKind.NONIID
    design = gen_design(design_kind, cfg.n, seed, walk_var=cfg.walk_var)
    if kind in (ExperimentKind.WS_IID, ExperimentKind.WS_NONIID):
        return gen_wellspecified(design, seed)
    return gen_misspecified(design, seed)


def transition_for(cfg: ExperimentConfig, d: int) -> np.ndarray:
    """Transition matrix the filters assume for an experiment.

    The transition is part of the known model structure everywhere (only the
    noise variances are unknown): identity for the well-specified random
    walks, the rotation matrix for the resonator, and the generating
    contraction for the mixture experiments, whose misspecification is the
    two-state switching rather than the per-state dynamics.
    """
    if cfg.experiment is ExperimentKind.RESONATOR:
        return resonator_transition()
    if cfg.experiment in (ExperimentKind.MS_IID, ExperimentKind.MS_NONIID):
        return MS_FILTER_CONTRACTION * np.eye(d)
    return np.eye(d)


def _resolved_flags(cfg: ExperimentConfig) -> tuple[bool, bool]:
    if cfg.experiment is ExperimentKind.RESONATOR:
        # state noise is known there; only the observation variance is learned
        learn_a = True if cfg.learn_a is None else cfg.learn_a
        learn_b = False if cfg.learn_b is None else cfg.learn_b
    else:
        learn_a = True if cfg.learn_a is None else cfg.learn_a
        learn_b = True if cfg.learn_b is None else cfg.learn_b
    return learn_a, learn_b


def _viking_init(cfg: ExperimentConfig, transform: NoiseTransform, ds: Dataset, seed: int):
    init = cfg.init
    _, learn_b = _resolved_flags(cfg)
    pin_known_q = cfg.experiment is ExperimentKind.RESONATOR and not learn_b
    if init.q0 is not None:
        q0 = init.q0
    elif pin_known_q:
        # pin f(b0) to the known state noise
        q0 = ds.truth.q_diag[0] if transform.latent_dim > 1 else float(ds.truth.q_diag[0].mean())
    else:
        q0 = 0.1
    if init.sigma0 is not None:
        sigma0 = init.sigma0
    else:
        sigma0 = 0.0 if pin_known_q else 0.1
    return default_initial_state(transform, a0=init.a0, s0=init.s0, q0=q0,
                                 sigma0=sigma0, p0=init.p0, seed=seed)


@dataclass(frozen=True)
class GridPoint:
    label: str
    rho_a: float = 0.0
    rho_b: float = 0.0
    q: float = 0.0
    shape: QShape | None = None


def _resolved_rhos(cfg: ExperimentConfig) -> tuple:
    """Per-experiment random-walk defaults for ``None`` rho fields."""
    if cfg.experiment is ExperimentKind.RESONATOR:
        auto_a, auto_b = RESONATOR_RHO_A, 0.0
    else:
        auto_a, auto_b = math.exp(-9.0), math.exp(-6.0)
    rho_a = auto_a if cfg.rho_a is None else cfg.rho_a
    rho_b = auto_b if cfg.rho_b is None else cfg.rho_b
    return rho_a, rho_b


def grid_points(cfg: ExperimentConfig) -> list[GridPoint]:
    """Deterministic grid enumeration; single-point methods get one entry."""
    if cfg.method is Method.VIKING:
        rho_a, rho_b = _resolved_rhos(cfg)
        ras = rho_a if isinstance(rho_a, tuple) else (rho_a,)
        rbs = rho_b if isinstance(rho_b, tuple) else (rho_b,)
        return [GridPoint(f"rho_a={a:.6g},rho_b={b:.6g}", rho_a=a, rho_b=b)
                for a in ras for b in rbs]
    if cfg.method is Method.KALMAN_ORACLE:
        return [GridPoint("true")]
    return [GridPoint(f"shape={s.value},q={q:.6g}", q=q, shape=s)
            for s in cfg.q_shapes for q in cfg.q_grid]


def _constant_q_matrix(shape: QShape, q: float, d: int) -> np.ndarray:
    if shape is QShape.MASKED:
        if d != 5:
            raise ValueError("masked constant-Q shape needs a 5-dimensional state")
        return q * np.diag([0.0, 0.0, 1.0, 1.0, 1.0])
    return q * np.eye(d)


def run_cell(cfg: ExperimentConfig, point: GridPoint, ds: Dataset, seed: int) -> list[StepRecord]:
    """One (grid point, seed) run over an already generated dataset."""
    d = ds.d
    K = transition_for(cfg, d)
    if cfg.method is Method.VIKING:
        transform = (NoiseTransform.scalar(d) if cfg.setting is Setting.SCALAR
                     else NoiseTransform.diagonal(d))
        learn_a, learn_b = _resolved_flags(cfg)
        hyper = VikingHyper(transform, K, rho_a=point.rho_a, rho_b=point.rho_b,
                            n_mc=cfg.n_mc, n_iter=cfg.n_iter,
                            learn_a=learn_a, learn_b=learn_b)
        trace, _ = viking_run(ds, hyper, init=_viking_init(cfg, transform, ds, seed))
        return trace
    init = GaussianState(np.zeros(d), cfg.init.p0 * np.eye(d))
    if cfg.method is Method.KALMAN_ORACLE:
        if ds.truth is None:
            raise ValueError("the known-variance oracle needs recorded truth")
        qs = np.zeros((ds.n, d, d))
        idx = np.arange(d)
        qs[:, idx, idx] = ds.truth.q_diag
        return kalman_run(ds, K, qs, ds.truth.sigma2, init=init)
    Q = _constant_q_matrix(point.shape, point.q, d)
    return kalman_run(ds, K, Q, cfg.sigma2_const, init=init)


@dataclass
class SummaryRow:
    method: str
    setting: str
    grid: str
    mean_mse: float
    stderr_mse: float


@dataclass
class ExperimentSummary:
    experiment: str
    rows: list[SummaryRow]
    best: int

    @property
    def best_row(self) -> SummaryRow:
        return self.rows[self.best]


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentSummary:
    """Evaluate every grid point over the configured seeds.

    When ``out_dir`` is given, per-seed traces of the selected grid point and
    the grid summary are written under
    ``<out>/<experiment>/<method>-<setting>/``.
    """
    points = grid_points(cfg)
    datasets = {seed: make_dataset(cfg, seed) for seed in cfg.seeds}
    rows: list[SummaryRow] = []
    mses = np.empty((len(points), len(cfg.seeds)))
    for i, point in enumerate(points):
        for j, seed in enumerate(cfg.seeds):
            mses[i, j] = mse_second_half(run_cell(cfg, point, datasets[seed], seed))
        rows.append(SummaryRow(cfg.method.value, cfg.setting.value, point.label,
                               float(mses[i].mean()), _stderr(mses[i])))
    best = min(range(len(points)), key=lambda i: (rows[i].mean_mse, i))
    summary = ExperimentSummary(cfg.experiment.value, rows, best)
    if out_dir is not None:
        cell_dir = Path(out_dir) / cfg.experiment.value / f"{cfg.method.value}-{cfg.setting.value}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        for seed in cfg.seeds:
            trace = run_cell(cfg, points[best], datasets[seed], seed)
            write_trace_csv(trace, cell_dir / f"seed{seed}.csv")
        write_summary_csv(summary, cell_dir / "summary.csv")
    return summary


def write_summary_csv(summary: ExperimentSummary, path: str | Path) -> None:
    lines = ["method,setting,grid,mean_mse,stderr_mse"]
    for row in summary.rows:
        lines.append(",".join([row.method, row.setting, row.grid,
                               fmt(row.mean_mse), fmt(row.stderr_mse)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sweep_nmc(cfg: ExperimentConfig, nmc_list: list[int],
              out_dir: str | Path | None = None) -> list[tuple[int, float, float]]:
    """Mean MSE per Monte-Carlo sample count, scaled by the ``n_mc = 1`` entry.

    Ratios are ratios of seed-averaged MSEs, so the ``n_mc = 1`` row is 1 by
    construction; it must be present in ``nmc_list``.
    """
    if 1 not in nmc_list:
        raise ValueError("nmc_list must contain the normalizer n_mc = 1")
    if cfg.method is not Method.VIKING:
        raise ValueError("the n_mc sweep only applies to the adaptive filter")
    means: dict[int, float] = {}
    for nmc in nmc_list:
        summary = run_experiment(replace(cfg, n_mc=nmc))
        means[nmc] = summary.best_row.mean_mse
    base = means[1]
    rows = [(nmc, means[nmc], means[nmc] / base) for nmc in nmc_list]
    if out_dir is not None:
        sweep_dir = Path(out_dir) / "sweep-nmc"
        sweep_dir.mkdir(parents=True, exist_ok=True)
        lines = ["n_mc,mean_mse,ratio"]
        for nmc, mean, ratio in rows:
            lines.append(",".join([str(nmc), fmt(mean), fmt(ratio)]))
        path = sweep_dir / f"{cfg.experiment.value}-{cfg.setting.value}.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


def parse_config_file(path: str | Path) -> dict[str, str]:
    """``key = value`` pairs, UTF-8, ``#`` comments; keys normalized to underscores."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values

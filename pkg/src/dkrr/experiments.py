"""
Experiment harness: synthetic-data simulations, lambda grid search, the
training-complexity model and CSV output.

Every simulation returns a list of ``MetricsRecord``.  Per-trial rows carry
the trial index; rows aggregated over trials carry ``trial = -1``.  RE/REC
are computed from trial-averaged MSEs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .data import Dataset, Partition, SyntheticTask, generate, partition_even, target_value, trial_rng
from .distributed import comm_totals, predict_dkrr, run_dkrr
from .errors import ConfigurationError, InvalidInputError
from .kernel import KernelSpec, gram, kernel_from_name
from .krr import fit, shifted_gram_factor
from .metrics import MetricsRecord, max_machines, mse, relative_error

log = logging.getLogger(__name__)

__all__ = [
    "SIMULATIONS",
    "CSV_HEADER",
    "DEFAULT_LAMBDA_GRID",
    "ExperimentConfig",
    "Estimator",
    "ComplexityModel",
    "default_config",
    "load_config",
    "grid_search_lambda",
    "complexity",
    "m_star",
    "m_star_hat",
    "calibrate_tau",
    "run_motivation",
    "run_simulation1",
    "run_simulation2",
    "run_simulation3",
    "run_single",
    "run_experiment",
    "aggregate",
    "emit_csv",
    "read_csv",
    "write_metadata",
]

SIMULATIONS = ("motivation", "sim1", "sim2", "sim3", "single")

CSV_HEADER = [
    "simulation", "task", "kernel", "N", "m", "ell", "lambda", "trial", "seed",
    "criterion", "value", "wall_time_s", "diverged", "comm_floats",
]

DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-8, 0, 20))

LAMBDA_RULE = "hold-out validation split (noisy, size n_validation), ties -> larger lambda"
TIMING_RULE = "per phase: max over machines; coordinator phases added; transmission time excluded"
EFFDIM_RULE = "plug-in: eigenvalues of Gram/n"

_DEFAULT_KERNEL = {"g1": "min", "g2": "wendland"}


@dataclass
class ExperimentConfig:
    simulation: str = "single"
    task: str = "g1"
    kernel: str | None = None
    N: list[int] = field(default_factory=lambda: [1000])
    m: list[int] = field(default_factory=lambda: [10])
    ell: list[int] = field(default_factory=lambda: [0, 1, 2])
    lambdas: list[float] = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    trials: int = 10
    seed: int = 0
    epsilon: float = 0.05
    out: str | None = None
    n_test: int = 1000
    n_validation: int | None = None
    noise_variance: float = 0.2
    tune_per_cell: bool = False
    tau: float | str = "calibrate"

    def __post_init__(self):
        if self.simulation not in SIMULATIONS:
            raise ConfigurationError(f"unknown simulation {self.simulation!r}; choose from {SIMULATIONS}")
        if self.task not in _DEFAULT_KERNEL:
            raise ConfigurationError(f"unknown task {self.task!r}")
        if self.kernel is None:
            self.kernel = _DEFAULT_KERNEL[self.task]
        for name in ("N", "m", "ell", "lambdas"):
            value = getattr(self, name)
            if isinstance(value, (int, float)):
                value = [value]
            if not value:
                raise ConfigurationError(f"grid {name!r} must be non-empty")
            setattr(self, name, list(value))
        self.N = [int(v) for v in self.N]
        self.m = [int(v) for v in self.m]
        self.ell = sorted({int(v) for v in self.ell})
        self.lambdas = [float(v) for v in self.lambdas]
        if any(v < 1 for v in self.N + self.m) or any(v < 0 for v in self.ell):
            raise ConfigurationError("N and m must be >= 1, ell >= 0")
        if any(not v > 0 for v in self.lambdas):
            raise ConfigurationError("lambda grid values must be positive")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if self.n_validation is None:
            self.n_validation = self.n_test
        if self.tau != "calibrate":
            try:
                self.tau = float(self.tau)
            except (TypeError, ValueError):
                raise ConfigurationError(f"tau must be a number or 'calibrate', got {self.tau!r}") from None
        try:
            self.task_spec()
            self.kernel_spec()
        except InvalidInputError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.kernel == "min" and self.task != "g1":
            raise ConfigurationError("the min kernel needs one-dimensional data (task g1)")

    def task_spec(self) -> SyntheticTask:
        return SyntheticTask(self.task, noise_variance=self.noise_variance)

    def kernel_spec(self) -> KernelSpec:
        return kernel_from_name(self.kernel)


def default_config(simulation: str, task: str = "g1", **overrides) -> ExperimentConfig:
    """Desk-scale defaults for each simulation; ``overrides`` replace any field."""
    one_d = task == "g1"
    base: dict = {"simulation": simulation, "task": task}
    if simulation == "motivation":
        base.update(N=[2000], m=[1, 2, 5, 10, 20, 40, 80, 160], ell=[0], task="g1")
    elif simulation == "sim1":
        base.update(
            N=[4000],
            m=list(range(20, 481, 20)) if one_d else list(range(2, 61, 2)),
            ell=[0, 1, 2, 4, 8],
        )
    elif simulation == "sim2":
        base.update(N=list(range(1000, 5001, 500)), m=[20, 80] if one_d else [4, 16], ell=[0, 1, 2, 4])
    elif simulation == "sim3":
        base.update(
            N=[2000, 4000],
            m=list(range(20, 401, 20)) if one_d else list(range(2, 41, 2)),
            ell=[1, 2, 4, 8],
        )
    elif simulation == "single":
        base.update(N=[1000], m=[10], ell=[0, 1, 2, 3, 4], trials=1)
    else:
        raise ConfigurationError(f"unknown simulation {simulation!r}")
    base.update(overrides)
    return ExperimentConfig(**base)


def load_config(path, simulation: str | None = None, **overrides) -> ExperimentConfig:
    """Read a YAML mapping of ExperimentConfig fields on top of the simulation's defaults.

    Keyword ``overrides`` (e.g. from the command line) take precedence over the file.
    """
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must hold a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    simulation = simulation or raw.pop("simulation", "single")
    raw.pop("simulation", None)
    raw.update(overrides)
    task = raw.pop("task", "g1")
    return default_config(simulation, task, **raw)


# --------------------------------------------------------------------------- lambda search


@dataclass
class Estimator:
    """Which estimator a lambda search scores: full KRR or DKRR(rounds) on ``partition``."""

    kind: str = "krr"
    partition: Partition | None = None
    rounds: int = 0

    def __post_init__(self):
        if self.kind not in ("krr", "dkrr"):
            raise InvalidInputError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "dkrr" and self.partition is None:
            raise InvalidInputError("a dkrr estimator needs a partition")


def _validation_scores(train, validation, kernel, grid, estimator, K, Kv=None):
    """Map lambda -> validation MSE (``None`` for diverged DKRR runs)."""
    if K is None:
        K = gram(kernel, train.inputs)
    if Kv is None:
        Kv = gram(kernel, validation.inputs, train.inputs)
    scores: dict[float, float | None] = {}
    for lam in grid:
        if estimator.kind == "krr":
            alpha = shifted_gram_factor(K, lam).solve(train.outputs)
            scores[lam] = mse(Kv @ alpha, validation.outputs)
        else:
            model = run_dkrr(train, estimator.partition, kernel, lam, estimator.rounds, gram_cache=K)
            if model.diverged:
                scores[lam] = None
            else:
                preds = predict_dkrr(model, validation.inputs, query_gram=Kv)
                scores[lam] = mse(preds, validation.outputs)
    return scores


def _best(scores: dict) -> float:
    best_lam, best = None, math.inf
    for lam in sorted(scores, reverse=True):
        s = scores[lam]
        if s is not None and np.isfinite(s) and s < best:
            best_lam, best = lam, s
    if best_lam is None:
        raise ConfigurationError("every lambda candidate diverged")
    return best_lam


def grid_search_lambda(
    train: Dataset,
    validation: Dataset,
    kernel: KernelSpec,
    grid: Sequence[float],
    estimator: Estimator | None = None,
    K: np.ndarray | None = None,
) -> float:
    """Lambda on ``grid`` with the smallest validation MSE; ties go to the larger lambda."""
    if not len(grid):
        raise ConfigurationError("lambda grid is empty")
    estimator = estimator or Estimator()
    return _best(_validation_scores(train, validation, kernel, list(grid), estimator, K))


# --------------------------------------------------------------------------- complexity


@dataclass(frozen=True)
class ComplexityModel:
    tau: float
    N: float
    m: float
    ell: float = 0

    def __post_init__(self):
        if not (self.tau > 0 and self.N > 0 and self.m > 0 and self.ell >= 0):
            raise InvalidInputError("tau, N, m must be positive and ell >= 0")


def complexity(model: ComplexityModel) -> tuple[float, float]:
    """Training cost of DKRR and DKRR(ell) in abstract flop units."""
    N, m, tau, ell = model.N, model.m, model.tau, model.ell
    omega = N * N * tau / m + N**3 / m**3
    return omega, omega + N * N * ell / m + m * N * ell


def m_star(N: float, tau: float, ell: float) -> float:
    """Real m minimizing the DKRR(ell) cost."""
    if ell < 1:
        raise InvalidInputError(f"m_star needs ell >= 1, got {ell}")
    a = tau + ell
    return math.sqrt((math.sqrt(a * a + 12.0 * ell) + a) / (2.0 * ell)) * math.sqrt(N)


def m_star_hat(m_star_value: float, m_b_hat: int | None, grid: Sequence[int] | None = None) -> int:
    """Machine count to use: m* when the accuracy bound allows it, otherwise the bound itself.

    m* is rounded down onto ``grid`` (or to an integer without a grid).
    """
    if m_b_hat is None:
        raise ConfigurationError("no machine count meets the accuracy threshold")
    if m_b_hat > m_star_value:
        if grid:
            below = [g for g in grid if g <= m_star_value]
            return int(max(below) if below else min(grid))
        return int(math.floor(m_star_value))
    return int(m_b_hat)


def calibrate_tau(kernel: KernelSpec, dim: int, n_evals: int = 10**6, seed: int = 0) -> float:
    """Cost of one kernel value relative to one fused multiply-add, measured on this machine."""
    rng = np.random.default_rng(seed)
    side = int(math.sqrt(n_evals))
    X = rng.random((side, dim))
    Y = rng.random((side, dim))
    a = rng.random(side * side)
    b = rng.random(side * side)
    c = rng.random(side * side)

    def best_of(fn, reps=3):
        t = math.inf
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            t = min(t, time.perf_counter() - t0)
        return t

    t_kernel = best_of(lambda: gram(kernel, X, Y))
    t_fma = best_of(lambda: a * b + c)
    return t_kernel / t_fma


# --------------------------------------------------------------------------- trials


@dataclass
class _Trial:
    trial: int
    seed: int
    rng: np.random.Generator
    train: Dataset
    validation: Dataset
    test: Dataset
    K: np.ndarray
    K_val: np.ndarray
    K_test: np.ndarray
    lam: float
    gmse: float
    gmse_time: float


def _prepare_trial(cfg: ExperimentConfig, N: int, trial: int) -> _Trial:
    seed = cfg.seed + trial
    rng = trial_rng(cfg.seed, trial)
    task = cfg.task_spec()
    kernel = cfg.kernel_spec()
    train = generate(task, N, True, rng)
    test = generate(task, cfg.n_test, False, rng)
    validation = generate(task, cfg.n_validation, True, rng)
    t0 = time.perf_counter()
    K = gram(kernel, train.inputs)
    K_val = gram(kernel, validation.inputs, train.inputs)
    K_test = gram(kernel, test.inputs, train.inputs)
    lam = _best(_validation_scores(train, validation, kernel, cfg.lambdas, Estimator(), K, K_val))
    model = fit(train, kernel, lam, K=K)
    gmse = mse(K_test @ model.alpha, test.outputs)
    elapsed = time.perf_counter() - t0
    return _Trial(trial, seed, rng, train, validation, test, K, K_val, K_test, lam, gmse, elapsed)


@dataclass
class _Cell:
    m: int
    lam: dict  # ell -> lambda used
    mse: dict  # ell -> test MSE (inf when diverged)
    diverged: dict
    train_time: dict
    comm: dict


def _run_cell(cfg: ExperimentConfig, tr: _Trial, m: int, timed: bool = False) -> _Cell:
    """DKRR(l) for every l in the config's grid on one partition into ``m`` shards.

    With ``timed`` the cross-Gram blocks are evaluated inside the local
    machines so that the step-1 timing reflects kernel cost.
    """
    kernel = cfg.kernel_spec()
    N = len(tr.train)
    partition = partition_even(N, m, tr.rng)
    ells = sorted(set(cfg.ell) | {0})
    L = max(ells)
    order = np.concatenate(partition.shards)
    crosses = None if timed else [tr.K[np.ix_(order, idx)] for idx in partition.shards]

    if cfg.tune_per_cell:
        per_lam = {}
        for lam in cfg.lambdas:
            model = run_dkrr(tr.train, partition, kernel, lam, L, crosses=crosses or None, gram_cache=tr.K)
            preds = predict_dkrr(model, tr.validation.inputs, all_rounds=True, query_gram=tr.K_val)
            per_lam[lam] = {
                e: (mse(preds[e], tr.validation.outputs) if e < preds.shape[0] else None) for e in ells
            }
        lam_for = {e: _best({lam: s[e] for lam, s in per_lam.items()}) for e in ells}
    else:
        lam_for = {e: tr.lam for e in ells}

    cell = _Cell(m, {}, {}, {}, {}, {})
    models = {}
    for lam in sorted(set(lam_for.values())):
        model = run_dkrr(tr.train, partition, kernel, lam, L, crosses=crosses)
        preds = predict_dkrr(model, tr.test.inputs, all_rounds=True, query_gram=tr.K_test)
        models[lam] = (model, preds)
    for e in ells:
        model, preds = models[lam_for[e]]
        cell.lam[e] = lam_for[e]
        done = e < preds.shape[0]
        cell.diverged[e] = not done
        cell.mse[e] = mse(preds[e], tr.test.outputs) if done else math.inf
        cell.train_time[e] = model.parallel_time(min(e, model.rounds_completed))
        rounds = min(e, model.rounds_completed)
        totals = comm_totals(model.comm, m, N, rounds)
        cell.comm[e] = totals["setup"] + sum(totals["per_round"])
    return cell


def _record(cfg, sim, N, m, ell, lam, trial, seed, criterion, value, wall=0.0, diverged=False, comm=0):
    return MetricsRecord(
        sim, cfg.task, cfg.kernel, int(N), int(m), int(ell), float(lam), int(trial), int(seed),
        criterion, float(value), float(wall), bool(diverged), int(comm),
    )


def _trial_records(cfg: ExperimentConfig, sim: str, tr: _Trial, cells: Iterable[_Cell]) -> list[MetricsRecord]:
    N = len(tr.train)
    out = [_record(cfg, sim, N, 1, 0, tr.lam, tr.trial, tr.seed, "GMSE", tr.gmse, tr.gmse_time)]
    for cell in cells:
        out.append(
            _record(cfg, sim, N, cell.m, 0, cell.lam[0], tr.trial, tr.seed, "AE", cell.mse[0],
                    cell.train_time[0], cell.diverged[0], cell.comm[0])
        )
        for e in cfg.ell:
            out.append(
                _record(cfg, sim, N, cell.m, e, cell.lam[e], tr.trial, tr.seed, "AEC", cell.mse[e],
                        cell.train_time[e], cell.diverged[e], cell.comm[e])
            )
    return out


def aggregate(records: Sequence[MetricsRecord], cfg: ExperimentConfig) -> list[MetricsRecord]:
    """Trial means of GMSE/AE/AEC plus RE/REC computed from those means.

    A (N, m, ell) cell with any diverged trial is marked diverged as a whole.
    Mean rows report the mean lambda and mean simulated training time.
    """
    out: list[MetricsRecord] = []
    groups: dict = {}
    for r in records:
        if r.trial < 0 or r.criterion not in ("GMSE", "AE", "AEC", "LOCAL"):
            continue
        groups.setdefault((r.simulation, r.N, r.m, r.ell, r.criterion), []).append(r)
    gmse_mean = {}
    for (sim, N, m, ell, crit), rs in groups.items():
        diverged = any(r.diverged for r in rs)
        value = math.inf if diverged else float(np.mean([r.value for r in rs]))
        lam = float(np.mean([r.lam for r in rs]))
        wall = float(np.mean([r.wall_time_s for r in rs]))
        comm = int(rs[0].comm_floats)
        out.append(_record(cfg, sim, N, m, ell, lam, -1, cfg.seed, crit, value, wall, diverged, comm))
        if crit == "GMSE":
            gmse_mean[N] = value
    for r in list(out):
        if r.criterion in ("AE", "AEC") and r.N in gmse_mean:
            rel = math.inf if r.diverged else relative_error(r.value, gmse_mean[r.N])
            crit = "RE" if r.criterion == "AE" else "REC"
            out.append(_record(cfg, r.simulation, r.N, r.m, r.ell, r.lam, -1, cfg.seed, crit, rel,
                               r.wall_time_s, r.diverged, r.comm_floats))
    return out


def _run_grid(cfg: ExperimentConfig, sim: str, timed: bool = False) -> list[MetricsRecord]:
    records: list[MetricsRecord] = []
    for N in cfg.N:
        for trial in range(cfg.trials):
            tr = _prepare_trial(cfg, N, trial)
            cells = []
            for m in cfg.m:
                if m > N:
                    raise ConfigurationError(f"m = {m} exceeds N = {N}")
                cells.append(_run_cell(cfg, tr, m, timed=timed))
            log.info("%s N=%d trial=%d lambda=%.3g GMSE=%.4g", sim, N, trial, tr.lam, tr.gmse)
            records.extend(_trial_records(cfg, sim, tr, cells))
    return records + aggregate(records, cfg)


def run_simulation1(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """AE and AEC(l) against m at fixed N, with the GMSE baseline."""
    return _run_grid(cfg, "sim1")


def run_simulation2(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """GMSE, AE and AEC(l) against N for fixed machine counts."""
    return _run_grid(cfg, "sim2")


def run_single(cfg: ExperimentConfig) -> list[MetricsRecord]:
    return _run_grid(cfg, "single")


def run_motivation(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """AE of DKRR, GMSE, and the local-approximation curve against m.

    The local-approximation value is the test MSE of KRR fitted on a single
    machine's shard with noise-free outputs, lambda tuned on noise-free
    validation data.
    """
    task = cfg.task_spec()
    kernel = cfg.kernel_spec()
    records: list[MetricsRecord] = []
    for N in cfg.N:
        for trial in range(cfg.trials):
            tr = _prepare_trial(cfg, N, trial)
            clean_val = Dataset(tr.validation.inputs, target_value(task, tr.validation.inputs))
            cells = []
            for m in cfg.m:
                cell = _run_cell(cfg, tr, m)
                cells.append(cell)
                shard_idx = np.sort(partition_even(N, m, tr.rng).shards[0])
                X = tr.train.inputs[shard_idx]
                local = Dataset(X, target_value(task, X))
                lam = grid_search_lambda(local, clean_val, kernel, cfg.lambdas)
                model = fit(local, kernel, lam)
                err = mse(gram(kernel, tr.test.inputs, X) @ model.alpha, tr.test.outputs)
                records.append(_record(cfg, "motivation", N, m, 0, lam, tr.trial, tr.seed, "LOCAL", err))
            records.extend(_trial_records(cfg, "motivation", tr, cells))
    return records + aggregate(records, cfg)


def run_simulation3(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """Training time and accuracy thresholds against m, plus the complexity model.

    Training time is simulated parallel wall time (see ``TIMING_RULE``) and is
    stored in the ``wall_time_s`` column of the AE/AEC rows.
    """
    records = _run_grid(cfg, "sim3", timed=True)
    tau = cfg.tau if isinstance(cfg.tau, float) else calibrate_tau(cfg.kernel_spec(), cfg.task_spec().dim)
    cfg._tau_used = tau  # picked up by write_metadata
    extra: list[MetricsRecord] = []
    for N in cfg.N:
        means = {(r.criterion, r.m, r.ell): r for r in records if r.trial == -1 and r.N == N}
        gmse = means[("GMSE", 1, 0)]
        re = {m: means[("RE", m, 0)].value for m in cfg.m}
        mbar = max_machines(re, cfg.epsilon)
        extra.append(_record(cfg, "sim3", N, mbar or 0, 0, gmse.lam, -1, cfg.seed, "mbar_B", mbar or 0,
                             diverged=mbar is None))
        for e in cfg.ell:
            if e == 0:
                continue
            rec = {m: means[("REC", m, e)].value for m in cfg.m}
            mhat = max_machines(rec, cfg.epsilon)
            ms = m_star(N, tau, e)
            extra.append(_record(cfg, "sim3", N, mhat or 0, e, gmse.lam, -1, cfg.seed, "mhat_B", mhat or 0,
                                 diverged=mhat is None))
            extra.append(_record(cfg, "sim3", N, 0, e, gmse.lam, -1, cfg.seed, "m_star", ms))
            if mhat is not None:
                msh = m_star_hat(ms, mhat, cfg.m)
                extra.append(_record(cfg, "sim3", N, msh, e, gmse.lam, -1, cfg.seed, "m_star_hat", msh))
            for m in cfg.m:
                om, om_l = complexity(ComplexityModel(tau, N, m, e))
                extra.append(_record(cfg, "sim3", N, m, e, gmse.lam, -1, cfg.seed, "omega_dkrr_ell", om_l))
        for m in cfg.m:
            om, _ = complexity(ComplexityModel(tau, N, m, 0))
            extra.append(_record(cfg, "sim3", N, m, 0, gmse.lam, -1, cfg.seed, "omega_dkrr", om))
    return records + extra


_RUNNERS = {
    "motivation": run_motivation,
    "sim1": run_simulation1,
    "sim2": run_simulation2,
    "sim3": run_simulation3,
    "single": run_single,
}


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRecord]:
    return _RUNNERS[cfg.simulation](cfg)


# --------------------------------------------------------------------------- output


def _fmt(v: float) -> str:
    return "%.17g" % v


def emit_csv(records: Sequence[MetricsRecord], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([
            r.simulation, r.task, r.kernel, r.N, r.m, r.ell, _fmt(r.lam), r.trial, r.seed,
            r.criterion, _fmt(r.value), _fmt(r.wall_time_s), int(r.diverged), r.comm_floats,
        ])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_csv(path) -> list[MetricsRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise InvalidInputError(f"unexpected CSV header {header}")
        out = []
        for row in reader:
            out.append(MetricsRecord(
                row[0], row[1], row[2], int(row[3]), int(row[4]), int(row[5]), float(row[6]),
                int(row[7]), int(row[8]), row[9], float(row[10]), float(row[11]), bool(int(row[12])),
                int(row[13]),
            ))
    return out


def write_metadata(cfg: ExperimentConfig, path) -> None:
    meta = {
        "config": {k: v for k, v in asdict(cfg).items()},
        "lambda_selection": LAMBDA_RULE,
        "timing_convention": TIMING_RULE,
        "effective_dimension": EFFDIM_RULE,
        "aggregate_rows": "trial = -1; RE/REC from trial-mean MSEs",
    }
    tau = getattr(cfg, "_tau_used", None)
    if tau is not None:
        meta["tau"] = tau
    Path(path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

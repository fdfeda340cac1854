"""Experiment runners: synthetic recovery sweeps, classification sweeps,
and the sketch-operator eigenvalue check, all emitting reproducible CSV.

Every trial is a pure function of (config, grid point, trial index): data,
hash seeds, and minibatch order are all re-randomized per trial from the
experiment seed, and the first- and second-order sketched trainers share
the same data and hash seeds within a trial so their comparison is paired.
Results are aggregated in a fixed order, so a rerun with the same config
and seed produces byte-identical CSV (wall-clock times are collected but
kept out of the CSV unless explicitly requested).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from ..data import InMemoryDataset, SyntheticDataset, SyntheticSpec, load_vw
from ..optim import (ConfigError, StepSchedule, StopRule, TrainerConfig,
                     make_trainer, run_training)
from ..sketch import CountSketchTable
from ..svec import SparseVec
from .metrics import accuracy, auc, l2_error, success_metric

EXPERIMENTS = ("phase_transition", "stepsize_sweep", "classify_vs_cf",
               "topk_sweep", "gram_check")
SKETCHED = ("bear", "mission")
_M64 = (1 << 64) - 1


class DataError(RuntimeError):
    """Dataset missing, unreadable, or mismatched with the experiment."""


@dataclass
class ExperimentConfig:
    experiment: str
    algos: tuple = ("bear", "mission")
    trials: int = 10
    seed: int = 0
    out: str = ""

    # grids
    cf_grid: tuple = (10.0, 5.0, 10 / 3, 2.5, 2.0, 5 / 3)
    eta_grid: tuple = (1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    k_grid: tuple = (64, 256, 1024)

    # trainer geometry / schedule
    rows: int = 3
    topk: int = 8
    tau: int = 5
    batch: int = 8
    schedule: str = "constant"
    eta0: float = 5e-4
    t0: float = 100.0

    # synthetic task
    p: int = 1000
    n: int = 900
    k: int = 8

    # real-data task
    data: str = "synthetic"
    test_data: str = ""
    task: str = "binary"
    limit: int = 0
    test_limit: int = 0
    metric: str = "accuracy"

    # stopping
    grad_tol: float = 1e-7
    patience: int = 5
    epoch_cap: int = 50  # synthetic step cap = epoch_cap * n / batch

    # gram check
    gram_m: int = 400

    per_trial: bool = False
    timing: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for algo in self.algos:
            if algo not in ("bear", "mission", "sgd", "olbfgs", "fh"):
                raise ConfigError(f"unknown algo {algo!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.experiment in ("phase_transition", "classify_vs_cf"):
            if not self.cf_grid:
                raise ConfigError("cf grid must be non-empty")
            if any(cf <= 0 for cf in self.cf_grid):
                raise ConfigError("compression factors must be positive")
        if self.experiment == "stepsize_sweep" and not self.eta_grid:
            raise ConfigError("eta grid must be non-empty")
        if self.experiment == "topk_sweep":
            if not self.k_grid:
                raise ConfigError("k grid must be non-empty")
            bad = [a for a in self.algos if a not in SKETCHED]
            if bad:
                raise ConfigError(
                    f"top-k sweep is for feature-selecting algos, not {bad}")
        if self.experiment in ("phase_transition", "stepsize_sweep"):
            if self.data != "synthetic":
                raise ConfigError(
                    f"{self.experiment} runs on synthetic data")
            bad = [a for a in self.algos if a not in SKETCHED]
            if bad:
                raise ConfigError(
                    f"{self.experiment} sweeps sketch memory; {bad} do not "
                    "have a sketch")
        if self.experiment in ("classify_vs_cf", "topk_sweep"):
            if self.data == "synthetic":
                raise ConfigError(
                    f"{self.experiment} needs --data <vw file>")
            if self.task == "regression":
                raise ConfigError("classification sweeps need a binary or "
                                  "multiclass dataset")
        if self.metric not in ("accuracy", "auc"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.metric == "auc" and self.task != "binary":
            raise ConfigError("auc is defined for binary tasks")

    def fingerprint(self) -> str:
        payload = {k: v for k, v in asdict(self).items()
                   if k not in ("out", "jobs", "timing")}
        return json.dumps(payload, sort_keys=True)


@dataclass
class TrialResult:
    algo: str
    cf: float | None = None
    eta: float | None = None
    topk: int | None = None
    trial_seed: int | None = None
    success: bool | None = None
    l2_error: float | None = None
    accuracy: float | None = None
    auc: float | None = None
    steps: int = 0
    converged: bool = False
    m_cells: int | None = None
    wall_ms: int = 0


def _mix(*parts: int) -> int:
    z = 0x243F6A8885A308D3
    for part in parts:
        z = (z ^ (part & _M64)) * 0x9E3779B97F4A7C15 & _M64
        z ^= z >> 29
        z = (z * 0xBF58476D1CE4E5B9) & _M64
        z ^= z >> 32
    return z


def trial_seeds(config_seed: int, grid_index: int,
                trial: int) -> tuple[int, int, int]:
    """(data_seed, sketch_seed, loop_seed); shared by all algos in a trial
    so paired comparisons see the same data and the same hash functions."""
    base = _mix(config_seed, grid_index, trial)
    return _mix(base, 1), _mix(base, 2), _mix(base, 3)


def sketch_width(p: int, cf: float, rows: int, n_classes: int) -> int:
    """Buckets per row so that total cells across classes ~= p / cf."""
    m_total = max(1, round(p / cf))
    return max(1, round(m_total / (rows * n_classes)))


def _map(cfg: ExperimentConfig, fn, tasks: list[tuple]) -> list:
    """Run one TrainerState per task, in parallel when jobs != 1; the task
    list order fixes the output order either way."""
    if cfg.jobs == 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    from joblib import Parallel, delayed
    return Parallel(n_jobs=cfg.jobs)(delayed(fn)(*task) for task in tasks)


# ---------------------------------------------------------------------------
# synthetic recovery trials


def _recovery_trial(cfg: ExperimentConfig, algo: str, width: int, eta: float,
                    grid_index: int, trial: int) -> TrialResult:
    data_seed, sketch_seed, loop_seed = trial_seeds(cfg.seed, grid_index,
                                                    trial)
    started = time.perf_counter()
    ds = SyntheticDataset(SyntheticSpec(p=cfg.p, n=cfg.n, k=cfg.k,
                                        seed=data_seed)).materialized()
    schedule = StepSchedule(cfg.schedule, eta, cfg.t0)
    tcfg = TrainerConfig(algo=algo, task="regression", rows=cfg.rows,
                         width=width, topk=cfg.topk, tau=cfg.tau,
                         schedule=schedule, seed=sketch_seed)
    trainer = make_trainer(tcfg)
    cap = math.ceil(cfg.epoch_cap * cfg.n / cfg.batch)
    stop = StopRule(max_steps=cap, grad_tol=cfg.grad_tol,
                    patience=cfg.patience,
                    stall_window=max(1, math.ceil(cfg.n / cfg.batch)))
    log = run_training(trainer, ds, cfg.batch, stop, seed=loop_seed)

    members = trainer.heaps[0].member_ids()
    estimate = SparseVec(members, trainer.sketches[0].query_many(members))
    truth = {f for f, _ in ds.beta_star.items()}
    wall_ms = int(1000 * (time.perf_counter() - started))
    return TrialResult(
        algo=algo,
        eta=eta,
        topk=cfg.topk,
        trial_seed=data_seed,
        success=success_metric(set(int(i) for i in members), truth),
        l2_error=l2_error(estimate, ds.beta_star),
        steps=log.steps,
        converged=log.converged,
        m_cells=cfg.rows * width,
        wall_ms=wall_ms,
    )


def run_phase_transition(cfg: ExperimentConfig) -> tuple[list[TrialResult], str]:
    tasks, cfs = [], []
    for gi, cf in enumerate(cfg.cf_grid):
        width = sketch_width(cfg.p, cf, cfg.rows, 1)
        for algo in cfg.algos:
            for trial in range(cfg.trials):
                tasks.append((cfg, algo, width, cfg.eta0, gi, trial))
                cfs.append(cf)
    results = _map(cfg, _recovery_trial, tasks)
    for r, cf in zip(results, cfs):
        r.cf = cf
    return results, render_csv(cfg, results)


def run_stepsize_sweep(cfg: ExperimentConfig) -> tuple[list[TrialResult], str]:
    width = sketch_width(cfg.p, cfg.cf_grid[0], cfg.rows, 1)
    tasks = []
    for gi, eta in enumerate(cfg.eta_grid):
        for algo in cfg.algos:
            for trial in range(cfg.trials):
                tasks.append((cfg, algo, width, eta, gi, trial))
    results = _map(cfg, _recovery_trial, tasks)
    for r in results:
        r.cf = cfg.cf_grid[0]
    return results, render_csv(cfg, results)


# ---------------------------------------------------------------------------
# classification trials


def _load_train_test(cfg: ExperimentConfig) -> tuple[InMemoryDataset, list, np.ndarray]:
    try:
        train = load_vw(cfg.data, cfg.task,
                        limit=cfg.limit or None)
        test = load_vw(cfg.test_data, cfg.task,
                       limit=cfg.test_limit or None)
    except OSError as exc:
        raise DataError(f"cannot read dataset: {exc}") from exc
    xs = [x for x, _ in test.examples]
    ys = np.array([y for _, y in test.examples], dtype=np.int64)
    if cfg.metric == "auc" and len(np.unique(ys)) < 2:
        raise DataError("auc needs both classes in the test set")
    return train, xs, ys


def _classify_trial(cfg: ExperimentConfig, train, test_xs, test_ys,
                    algo: str, *, width: int = 0, fh_size: int = 0,
                    topk: int = 0, m_cells: int | None = None,
                    grid_index: int = 0, trial: int = 0) -> TrialResult:
    _, sketch_seed, loop_seed = trial_seeds(cfg.seed, grid_index, trial)
    started = time.perf_counter()
    n_classes = train.n_classes if cfg.task == "multiclass" else 1
    schedule = StepSchedule(cfg.schedule, cfg.eta0, cfg.t0)
    common = dict(task=cfg.task, n_classes=n_classes, schedule=schedule,
                  seed=sketch_seed, tau=cfg.tau)
    if algo in SKETCHED:
        tcfg = TrainerConfig(algo=algo, rows=cfg.rows, width=width,
                             topk=topk, **common)
    elif algo == "fh":
        tcfg = TrainerConfig(algo="fh", fh_size=fh_size, **common)
    else:
        tcfg = TrainerConfig(algo=algo, dim=train.p, **common)
    trainer = make_trainer(tcfg)
    steps = math.ceil(train.n / cfg.batch)
    log = run_training(trainer, train, cfg.batch,
                       StopRule(max_steps=steps), seed=loop_seed,
                       mode="epoch")

    scores = trainer.predict_scores_many(test_xs)
    if cfg.task == "multiclass":
        predicted = np.argmax(scores, axis=1)
    else:
        predicted = (scores[:, 0] > 0).astype(np.int64)
    result = TrialResult(
        algo=algo,
        trial_seed=sketch_seed,
        accuracy=accuracy(predicted, test_ys),
        steps=log.steps,
        converged=not (log.diverged or log.stalled),
        m_cells=m_cells,
        topk=topk if algo in SKETCHED else None,
        wall_ms=int(1000 * (time.perf_counter() - started)),
    )
    if cfg.metric == "auc":
        result.auc = auc(scores[:, 0], test_ys)
    return result


def run_classify_vs_cf(cfg: ExperimentConfig) -> tuple[list[TrialResult], str]:
    train, test_xs, test_ys = _load_train_test(cfg)
    n_classes = train.n_classes if cfg.task == "multiclass" else 1
    results = []
    for gi, cf in enumerate(cfg.cf_grid):
        width = sketch_width(train.p, cf, cfg.rows, n_classes)
        m_total = width * cfg.rows * n_classes
        for algo in cfg.algos:
            if algo in ("sgd", "olbfgs") and gi > 0:
                continue  # dense baselines do not vary with cf
            for trial in range(cfg.trials):
                r = _classify_trial(
                    cfg, train, test_xs, test_ys, algo, width=width,
                    fh_size=m_total, topk=cfg.topk, m_cells=m_total,
                    grid_index=gi, trial=trial)
                r.cf = 1.0 if algo in ("sgd", "olbfgs") else cf
                if algo in ("sgd", "olbfgs"):
                    r.m_cells = train.p
                results.append(r)
    return results, render_csv(cfg, results)


def run_topk_sweep(cfg: ExperimentConfig) -> tuple[list[TrialResult], str]:
    train, test_xs, test_ys = _load_train_test(cfg)
    n_classes = train.n_classes if cfg.task == "multiclass" else 1
    cf = cfg.cf_grid[0]
    width = sketch_width(train.p, cf, cfg.rows, n_classes)
    results = []
    for gi, k in enumerate(cfg.k_grid):
        for algo in cfg.algos:
            for trial in range(cfg.trials):
                r = _classify_trial(
                    cfg, train, test_xs, test_ys, algo, width=width,
                    topk=int(k), m_cells=width * cfg.rows * n_classes,
                    grid_index=gi, trial=trial)
                r.cf = cf
                results.append(r)
    return results, render_csv(cfg, results)


# ---------------------------------------------------------------------------
# sketch-operator eigenvalue concentration


@dataclass
class GramTrial:
    trial_seed: int
    mean_eig_norm: float
    min_eig_norm: float
    max_eig_norm: float
    eps_emp: float


def sketch_matrix(p: int, m: int, rows: int, seed: int) -> np.ndarray:
    """Explicit p-by-m operator of one sketch: row i has d entries
    sign_j(i)/sqrt(d) at column j*c + bucket_j(i)."""
    if m % rows:
        raise ConfigError("m must be divisible by rows")
    width = m // rows
    table = CountSketchTable(rows, width, seed)
    ids = np.arange(p, dtype=np.uint64)
    s = np.zeros((p, m))
    scale = 1.0 / np.sqrt(rows)
    for j in range(rows):
        cols = j * width + table.buckets(j, ids)
        s[np.arange(p), cols] = table.signs(j, ids) * scale
    return s


def run_gram_check(cfg: ExperimentConfig) -> tuple[list[GramTrial], str]:
    p, m, rows = cfg.p, cfg.gram_m, cfg.rows
    if p > 5000:
        raise ConfigError("gram check materializes S; use p <= 5000")
    ratio = p / m
    trials = []
    for trial in range(cfg.trials):
        seed = _mix(cfg.seed, 0xE16, trial)
        s = sketch_matrix(p, m, rows, seed)
        eigs = np.linalg.eigvalsh(s.T @ s)
        norm = eigs / ratio
        trials.append(GramTrial(
            trial_seed=seed,
            mean_eig_norm=float(norm.mean()),
            min_eig_norm=float(norm.min()),
            max_eig_norm=float(norm.max()),
            eps_emp=float(np.abs(norm - 1.0).max()),
        ))
    lines = [f"# sketchsel-bench config={cfg.fingerprint()}",
             "trial_seed,mean_eig_norm,min_eig_norm,max_eig_norm,eps_emp"]
    for t in trials:
        lines.append(f"{t.trial_seed},{t.mean_eig_norm!r},"
                     f"{t.min_eig_norm!r},{t.max_eig_norm!r},{t.eps_emp!r}")
    mean_eps = float(np.mean([t.eps_emp for t in trials]))
    overall = float(np.mean([t.mean_eig_norm for t in trials]))
    lines.append(f"aggregate,{overall!r},"
                 f"{min(t.min_eig_norm for t in trials)!r},"
                 f"{max(t.max_eig_norm for t in trials)!r},{mean_eps!r}")
    return trials, "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV


_COLUMNS = ("algo", "cf", "eta", "topk", "trial_seed", "trials", "success",
            "l2_error", "accuracy", "auc", "steps", "converged", "m_cells")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(cfg: ExperimentConfig, results: list[TrialResult]) -> str:
    """One aggregate row per (algo, grid point); per-trial rows optional.

    Wall-clock columns appear only with timing=True; determinism checks
    compare the timing-free form.
    """
    columns = _COLUMNS + (("wall_ms",) if cfg.timing else ())
    lines = [f"# sketchsel-bench config={cfg.fingerprint()}",
             ",".join(columns)]

    def emit(row: dict) -> None:
        lines.append(",".join(_fmt(row.get(col)) for col in columns))

    groups: dict[tuple, list[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.algo, r.cf, r.eta, r.topk), []).append(r)
    for (algo, cf, eta, topk), rs in sorted(
            groups.items(), key=lambda kv: tuple(map(repr, kv[0]))):
        agg = {
            "algo": algo, "cf": cf, "eta": eta, "topk": topk,
            "trials": len(rs),
            "steps": float(np.mean([r.steps for r in rs])),
            "converged": None,
            "m_cells": rs[0].m_cells,
        }
        for fld, attr in (("success", "success"), ("l2_error", "l2_error"),
                          ("accuracy", "accuracy"), ("auc", "auc")):
            vals = [getattr(r, attr) for r in rs]
            if all(v is not None for v in vals):
                agg[fld] = float(np.mean([float(v) for v in vals]))
        if cfg.timing:
            agg["wall_ms"] = int(np.mean([r.wall_ms for r in rs]))
        emit(agg)
        if cfg.per_trial:
            for r in rs:
                row = {col: getattr(r, col, None) for col in _COLUMNS}
                row["trials"] = None
                if cfg.timing:
                    row["wall_ms"] = r.wall_ms
                emit(row)
    return "\n".join(lines) + "\n"


RUNNERS = {
    "phase_transition": run_phase_transition,
    "stepsize_sweep": run_stepsize_sweep,
    "classify_vs_cf": run_classify_vs_cf,
    "topk_sweep": run_topk_sweep,
    "gram_check": run_gram_check,
}


def run_experiment(cfg: ExperimentConfig):
    return RUNNERS[cfg.experiment](cfg)

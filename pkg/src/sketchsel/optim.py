"""The trainers: sketched second-order (bear), sketched first-order
(mission), dense SGD, dense online L-BFGS, and feature hashing.

The two sketched trainers never allocate anything sized by the ambient
dimension: weights live in per-class count-sketch tables, the working set
of an update is bounded by the minibatch's active set, and the top-k heap
caps how many weights are ever read back. The dense trainers are the O(p)
references the sketched ones are measured against, sharing the same
gradient and two-loop code paths so that collision-free runs agree to
floating-point accuracy.

One update of the second-order trainer, per class:

  1. read back the weights at (active set) & (heap members)
  2. gradient at those weights over the minibatch
  3. two-loop descent direction from the curvature history
  4. scatter -eta * (direction restricted to the active set) into the sketch
  5. refresh the heap with the re-queried weights of the touched features
  6. read back again, second gradient over the *same* minibatch
  7. store the curvature pair (weight difference, gradient difference)

The first-order trainer is steps 1, 2, 4 (scattering the raw gradient),
and 5.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable

import numpy as np

from . import _kernels
from .lbfgs import CURVATURE_FLOOR, CurvatureHistory, CurvaturePair, direction
from .loss import (Minibatch, grad_logistic, grad_mse, sigmoid,
                   softmax_probs, softmax_residuals)
from .sketch import CountSketchTable, lane_seeds
from .svec import SparseVec, as_id_array, axpy, restrict
from .topk import TopKHeap

ALGOS = ("bear", "mission", "sgd", "olbfgs", "fh")
TASKS = ("regression", "binary", "multiclass")


class NonFiniteGradientError(RuntimeError):
    """A step produced a non-finite gradient or direction; state was left
    as it was before the step."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StepSchedule:
    """eta_t = eta0 (constant) or eta0 / (t + t0) (inverse-time)."""

    kind: str
    eta0: float
    t0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "invt"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.eta0 > 0:
            raise ConfigError("eta0 must be positive")
        if self.kind == "invt" and not self.t0 > 0:
            raise ConfigError("t0 must be positive")

    def eta(self, t: int) -> float:
        if self.kind == "constant":
            return self.eta0
        return self.eta0 / (t + self.t0)


@dataclass(frozen=True)
class TrainerConfig:
    algo: str
    task: str
    schedule: StepSchedule
    n_classes: int = 1   # weight vectors; 1 for regression/binary
    rows: int = 5        # sketch rows d
    width: int = 0       # sketch buckets per row c (sketched algos)
    topk: int = 0        # heap capacity k (sketched algos)
    tau: int = 5         # curvature history length
    dim: int = 0         # dense weight length (sgd/olbfgs)
    fh_size: int = 0     # feature-hashing embedding size m (fh)
    seed: int = 0
    curvature_floor: float = CURVATURE_FLOOR

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.task == "multiclass" and self.n_classes < 2:
            raise ConfigError("multiclass needs n_classes >= 2")
        if self.task != "multiclass" and self.n_classes != 1:
            raise ConfigError(f"task {self.task} uses exactly one weight vector")
        if self.algo in ("bear", "mission"):
            if self.rows < 1 or self.width < 1:
                raise ConfigError("sketched algos need rows >= 1, width >= 1")
            if self.topk < 1:
                raise ConfigError("sketched algos need topk >= 1")
        if self.algo in ("sgd", "olbfgs") and self.dim < 1:
            raise ConfigError("dense algos need dim >= 1")
        if self.algo == "fh" and self.fh_size < 1:
            raise ConfigError("fh needs fh_size >= 1")
        if self.algo in ("bear", "olbfgs") and self.tau < 1:
            raise ConfigError("tau must be >= 1")


@dataclass
class StepReport:
    t: int
    eta: float
    grad_norm: float
    accepted_pair: bool = False
    peak_cells: int = 0  # floats live in state+step at the peak, ambient-free


def active_set(batch: Minibatch) -> set[int]:
    """Union of the feature supports of the batch's examples."""
    return {int(i) for i in batch.active_ids}


def _grad_norm(grads: list[SparseVec]) -> float:
    return float(np.sqrt(sum(g.norm_sq() for g in grads)))


def compute_gradients(task: str, betas: list[SparseVec],
                      batch: Minibatch) -> list[SparseVec]:
    """Per-weight-vector loss gradients for the configured task."""
    if task == "regression":
        return [grad_mse(betas[0], batch)]
    if task == "binary":
        return [grad_logistic(betas[0], batch)]
    residuals = softmax_residuals(betas, batch)
    return [batch.accumulate(residuals[:, c]) for c in range(len(betas))]


def _check_finite(vectors: Iterable[SparseVec]) -> bool:
    return all(np.all(np.isfinite(v.vals)) for v in vectors)


class _SketchedTrainer:
    """State and read-back paths shared by the bear and mission trainers."""

    def __init__(self, config: TrainerConfig):
        self.config = config
        self.t = 0
        self.sketches = [
            CountSketchTable(config.rows, config.width,
                             _class_seed(config.seed, c))
            for c in range(config.n_classes)
        ]
        self.heaps = [TopKHeap(config.topk) for _ in range(config.n_classes)]

    @property
    def n_weights(self) -> int:
        return self.config.n_classes

    def query_restricted(self, active, cls: int = 0) -> SparseVec:
        """Weights at (active set) & (heap members); zero elsewhere.

        The intersection can be empty (fresh state, or a batch of entirely
        untracked features); the gradient at the zero vector is still
        generally non-zero, so training proceeds.
        """
        active = as_id_array(active)
        members = self.heaps[cls].member_ids()
        ids = np.intersect1d(active, members, assume_unique=True)
        if len(ids) == 0:
            return SparseVec.empty()
        vals = self.sketches[cls].query_many(ids)
        keep = vals != 0.0
        return SparseVec(ids[keep], vals[keep], _trusted=True)

    def _betas(self, active_ids: np.ndarray) -> list[SparseVec]:
        return [self.query_restricted(active_ids, c)
                for c in range(self.n_weights)]

    def _refresh_heap(self, cls: int, touched: np.ndarray) -> None:
        if len(touched) == 0:
            return
        fresh = self.sketches[cls].query_many(touched)
        self.heaps[cls].offer_many(touched, fresh)

    def _state_cells(self) -> int:
        cells = sum(s.total_size for s in self.sketches)
        cells += sum(len(h) for h in self.heaps)
        return cells

    def predict_scores(self, x: SparseVec) -> np.ndarray:
        """Every active feature of x is queried, not only heap members."""
        return np.array([
            float(np.dot(x.vals, self.sketches[c].query_many(x.ids)))
            if x.nnz else 0.0
            for c in range(self.n_weights)
        ])

    def predict_scores_many(self, xs: list[SparseVec]) -> np.ndarray:
        """(n, n_weights) score matrix, batching the sketch queries."""
        n = len(xs)
        out = np.zeros((n, self.n_weights))
        if n == 0:
            return out
        ids = np.concatenate([x.ids for x in xs])
        vals = np.concatenate([x.vals for x in xs])
        rows = np.repeat(np.arange(n), [x.nnz for x in xs])
        uids, cols = np.unique(ids, return_inverse=True)
        for c in range(self.n_weights):
            w = self.sketches[c].query_many(uids)
            out[:, c] = np.bincount(rows, weights=vals * w[cols], minlength=n)
        return out

    def select_features(self, k: int | None = None) -> list[list[tuple[int, float]]]:
        """Per-class heap snapshots, descending |weight|."""
        k = self.config.topk if k is None else k
        return [heap.snapshot()[:k] for heap in self.heaps]


class BearTrainer(_SketchedTrainer):
    """Second-order sketched trainer (algo "bear")."""

    def __init__(self, config: TrainerConfig):
        super().__init__(config)
        self.histories = [
            CurvatureHistory(config.tau, config.curvature_floor)
            for _ in range(config.n_classes)
        ]

    def step(self, batch: Minibatch) -> StepReport:
        with np.errstate(over="ignore", invalid="ignore"):
            return self._step(batch)

    def _step(self, batch: Minibatch) -> StepReport:
        cfg = self.config
        eta = cfg.schedule.eta(self.t)
        active = batch.active_ids

        betas = self._betas(active)
        grads = compute_gradients(cfg.task, betas, batch)
        if not _check_finite(grads):
            raise NonFiniteGradientError(f"non-finite gradient at t={self.t}")
        zs = [direction(grads[c], self.histories[c])
              for c in range(self.n_weights)]
        z_hats = [restrict(z, active) for z in zs]
        updates = [z.scaled(-eta) for z in z_hats]
        if not _check_finite(zs) or not _check_finite(updates):
            raise NonFiniteGradientError(f"non-finite direction at t={self.t}")

        snapshots = [s.counters.copy() for s in self.sketches]
        heap_snaps = [h.clone() for h in self.heaps]
        for c in range(self.n_weights):
            self.sketches[c].add_sparse(updates[c])
            self._refresh_heap(c, z_hats[c].ids)

        betas_new = self._betas(active)
        grads_new = compute_gradients(cfg.task, betas_new, batch)
        if not _check_finite(grads_new):
            for c in range(self.n_weights):
                self.sketches[c].counters[:] = snapshots[c]
                self.heaps[c] = heap_snaps[c]
            raise NonFiniteGradientError(
                f"non-finite post-update gradient at t={self.t}")

        accepted = False
        pair_cells = 0
        for c in range(self.n_weights):
            s = axpy(-1.0, betas[c], betas_new[c])
            r = axpy(-1.0, grads[c], grads_new[c])
            pair_cells += s.nnz + r.nnz
            accepted |= self.histories[c].push_pair(s, r)

        step_cells = sum(
            betas[c].nnz + grads[c].nnz + zs[c].nnz + z_hats[c].nnz
            + betas_new[c].nnz + grads_new[c].nnz
            for c in range(self.n_weights)
        ) + pair_cells + len(active)
        history_cells = sum(p.s.nnz + p.r.nnz
                            for h in self.histories for p in h.pairs)
        report = StepReport(
            t=self.t, eta=eta, grad_norm=_grad_norm(grads),
            accepted_pair=accepted,
            peak_cells=self._state_cells() + history_cells + step_cells,
        )
        self.t += 1
        return report


class MissionTrainer(_SketchedTrainer):
    """First-order sketched trainer (algo "mission")."""

    def step(self, batch: Minibatch) -> StepReport:
        with np.errstate(over="ignore", invalid="ignore"):
            return self._step(batch)

    def _step(self, batch: Minibatch) -> StepReport:
        eta = self.config.schedule.eta(self.t)
        active = batch.active_ids

        betas = self._betas(active)
        grads = compute_gradients(self.config.task, betas, batch)
        updates = [g.scaled(-eta) for g in grads]
        if not _check_finite(grads) or not _check_finite(updates):
            raise NonFiniteGradientError(f"non-finite gradient at t={self.t}")

        for c in range(self.n_weights):
            self.sketches[c].add_sparse(updates[c])
            self._refresh_heap(c, grads[c].ids)

        step_cells = sum(betas[c].nnz + 2 * grads[c].nnz
                         for c in range(self.n_weights)) + len(active)
        report = StepReport(
            t=self.t, eta=eta, grad_norm=_grad_norm(grads),
            peak_cells=self._state_cells() + step_cells,
        )
        self.t += 1
        return report


class DenseTrainer:
    """Reference trainers with a dense weight array (algos "sgd", "olbfgs").

    Weight reads and the curvature machinery run through the same sparse
    code paths as the sketched trainers, restricted to each batch's active
    set, so per-step cost is O(active), not O(dim).
    """

    def __init__(self, config: TrainerConfig):
        self.config = config
        self.t = 0
        self.weights = np.zeros((config.n_classes, config.dim))
        self.histories = ([CurvatureHistory(config.tau, config.curvature_floor)
                           for _ in range(config.n_classes)]
                          if config.algo == "olbfgs" else None)

    @property
    def n_weights(self) -> int:
        return self.config.n_classes

    def _beta_view(self, active: np.ndarray, cls: int) -> SparseVec:
        if len(active) and int(active[-1]) >= self.config.dim:
            raise ConfigError(
                f"feature id {int(active[-1])} outside dense dim "
                f"{self.config.dim}")
        vals = self.weights[cls][active.astype(np.intp)]
        keep = vals != 0.0
        return SparseVec(active[keep], vals[keep].copy(), _trusted=True)

    def step(self, batch: Minibatch) -> StepReport:
        with np.errstate(over="ignore", invalid="ignore"):
            return self._step(batch)

    def _step(self, batch: Minibatch) -> StepReport:
        cfg = self.config
        eta = cfg.schedule.eta(self.t)
        active = batch.active_ids

        betas = [self._beta_view(active, c) for c in range(self.n_weights)]
        grads = compute_gradients(cfg.task, betas, batch)
        if not _check_finite(grads):
            raise NonFiniteGradientError(f"non-finite gradient at t={self.t}")

        if cfg.algo == "sgd":
            updates = [g.scaled(-eta) for g in grads]
            if not _check_finite(updates):
                raise NonFiniteGradientError(
                    f"non-finite update at t={self.t}")
            for c in range(self.n_weights):
                u = updates[c]
                self.weights[c][u.ids.astype(np.intp)] += u.vals
            report = StepReport(t=self.t, eta=eta,
                                grad_norm=_grad_norm(grads))
            self.t += 1
            return report

        zs = [direction(grads[c], self.histories[c])
              for c in range(self.n_weights)]
        updates = [z.scaled(-eta) for z in zs]
        if not _check_finite(zs) or not _check_finite(updates):
            raise NonFiniteGradientError(f"non-finite direction at t={self.t}")
        saved = [(u.ids.astype(np.intp),
                  self.weights[c][u.ids.astype(np.intp)].copy())
                 for c, u in enumerate(updates)]
        for c in range(self.n_weights):
            u = updates[c]
            self.weights[c][u.ids.astype(np.intp)] += u.vals

        betas_new = [self._beta_view(active, c) for c in range(self.n_weights)]
        grads_new = compute_gradients(cfg.task, betas_new, batch)
        if not _check_finite(grads_new):
            for c, (idx, vals) in enumerate(saved):
                self.weights[c][idx] = vals
            raise NonFiniteGradientError(
                f"non-finite post-update gradient at t={self.t}")

        accepted = False
        for c in range(self.n_weights):
            s = axpy(-1.0, betas[c], betas_new[c])
            r = axpy(-1.0, grads[c], grads_new[c])
            accepted |= self.histories[c].push_pair(s, r)

        report = StepReport(t=self.t, eta=eta, grad_norm=_grad_norm(grads),
                            accepted_pair=accepted)
        self.t += 1
        return report

    def predict_scores(self, x: SparseVec) -> np.ndarray:
        keep = x.ids < np.uint64(self.config.dim)  # unseen test ids weigh 0
        idx = x.ids[keep].astype(np.intp)
        return np.array([float(np.dot(x.vals[keep], self.weights[c][idx]))
                         for c in range(self.n_weights)])

    def predict_scores_many(self, xs: list[SparseVec]) -> np.ndarray:
        n = len(xs)
        out = np.zeros((n, self.n_weights))
        if n == 0:
            return out
        ids = np.concatenate([x.ids for x in xs])
        vals = np.concatenate([x.vals for x in xs])
        rows = np.repeat(np.arange(n), [x.nnz for x in xs])
        keep = ids < np.uint64(self.config.dim)
        ids, vals, rows = ids[keep].astype(np.intp), vals[keep], rows[keep]
        for c in range(self.n_weights):
            out[:, c] = np.bincount(rows, weights=vals * self.weights[c][ids],
                                    minlength=n)
        return out


def fh_remap(seed: int, size: int, x: SparseVec) -> SparseVec:
    """Project features into `size` buckets with one signed hash.

    Colliding features share a bucket (and therefore a weight) for good;
    there is no inverse mapping, so this supports prediction only.
    """
    if x.nnz == 0:
        return x
    index_seeds, sign_seeds = lane_seeds(seed, 1)
    buckets = _kernels.bucket_hash(int(index_seeds[0]), size, x.ids)
    signed = _kernels.sign_hash(int(sign_seeds[0]), x.ids) * x.vals
    order = np.argsort(buckets, kind="stable")
    ub, start = np.unique(buckets[order], return_index=True)
    summed = np.add.reduceat(signed[order], start)
    keep = summed != 0.0
    return SparseVec(ub[keep].astype(np.uint64), summed[keep])


class FHTrainer:
    """Feature hashing baseline (algo "fh"): remap, then dense SGD.

    The embedding size equals the total sketch budget it is compared
    against. Unlike the sketched trainers it cannot name the original
    features afterwards.
    """

    def __init__(self, config: TrainerConfig):
        self.config = config
        self.t = 0
        self.weights = np.zeros((config.n_classes, config.fh_size))

    @property
    def n_weights(self) -> int:
        return self.config.n_classes

    def _remap_batch(self, batch: Minibatch) -> Minibatch:
        seed, m = self.config.seed, self.config.fh_size
        return Minibatch([(fh_remap(seed, m, x), y)
                          for x, y in batch.examples])

    def step(self, batch: Minibatch) -> StepReport:
        with np.errstate(over="ignore", invalid="ignore"):
            return self._step(batch)

    def _step(self, batch: Minibatch) -> StepReport:
        cfg = self.config
        eta = cfg.schedule.eta(self.t)
        remapped = self._remap_batch(batch)
        active = remapped.active_ids

        betas = [self._beta_view(active, c) for c in range(self.n_weights)]
        grads = compute_gradients(cfg.task, betas, remapped)
        updates = [g.scaled(-eta) for g in grads]
        if not _check_finite(grads) or not _check_finite(updates):
            raise NonFiniteGradientError(f"non-finite gradient at t={self.t}")
        for c in range(self.n_weights):
            u = updates[c]
            self.weights[c][u.ids.astype(np.intp)] += u.vals
        report = StepReport(t=self.t, eta=eta, grad_norm=_grad_norm(grads))
        self.t += 1
        return report

    def _beta_view(self, active: np.ndarray, cls: int) -> SparseVec:
        vals = self.weights[cls][active.astype(np.intp)]
        keep = vals != 0.0
        return SparseVec(active[keep], vals[keep].copy(), _trusted=True)

    def predict_scores(self, x: SparseVec) -> np.ndarray:
        mapped = fh_remap(self.config.seed, self.config.fh_size, x)
        idx = mapped.ids.astype(np.intp)
        return np.array([float(np.dot(mapped.vals, self.weights[c][idx]))
                         for c in range(self.n_weights)])

    def predict_scores_many(self, xs: list[SparseVec]) -> np.ndarray:
        seed, m = self.config.seed, self.config.fh_size
        mapped = [fh_remap(seed, m, x) for x in xs]
        n = len(mapped)
        out = np.zeros((n, self.n_weights))
        if n == 0:
            return out
        ids = np.concatenate([x.ids for x in mapped]).astype(np.intp)
        vals = np.concatenate([x.vals for x in mapped])
        rows = np.repeat(np.arange(n), [x.nnz for x in mapped])
        for c in range(self.n_weights):
            out[:, c] = np.bincount(rows, weights=vals * self.weights[c][ids],
                                    minlength=n)
        return out


Trainer = BearTrainer | MissionTrainer | DenseTrainer | FHTrainer


def make_trainer(config: TrainerConfig) -> Trainer:
    if config.algo == "bear":
        return BearTrainer(config)
    if config.algo == "mission":
        return MissionTrainer(config)
    if config.algo in ("sgd", "olbfgs"):
        return DenseTrainer(config)
    return FHTrainer(config)


def _class_seed(seed: int, cls: int) -> int:
    return (seed + 0x9E3779B97F4A7C15 * (cls + 1)) & ((1 << 64) - 1)


def predict(trainer: Trainer, x: SparseVec):
    """Binary/regression: one score. Multiclass: (argmax label, probs).

    For sketched trainers the score reads every active feature of x back
    from the sketch, not only heap members.
    """
    scores = trainer.predict_scores(x)
    if trainer.config.task == "multiclass":
        shifted = scores - scores.max()
        probs = np.exp(shifted)
        probs /= probs.sum()
        return int(np.argmax(scores)), probs
    return float(scores[0])


def predict_labels_many(trainer: Trainer, xs: list[SparseVec]) -> np.ndarray:
    scores = trainer.predict_scores_many(xs)
    if trainer.config.task == "multiclass":
        return np.argmax(scores, axis=1)
    return (scores[:, 0] > 0).astype(np.int64)


def select_features(trainer: Trainer, k: int | None = None):
    return trainer.select_features(k)


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class StopRule:
    """Stop on `patience` consecutive minibatch gradient norms below
    grad_tol, or on the step cap, whichever comes first.

    With stall_window > 0, a run whose windowed best gradient norm stops
    improving by stall_rtol for stall_windows consecutive windows is cut
    short and recorded as non-converged (it would have ridden out the cap
    to the same outcome)."""

    max_steps: int
    grad_tol: float = 0.0
    patience: int = 5
    stall_window: int = 0
    stall_windows: int = 5
    stall_rtol: float = 0.01


@dataclass
class TrainingLog:
    steps: int = 0
    converged: bool = False
    diverged: bool = False
    stalled: bool = False
    final_grad_norm: float = float("nan")
    peak_cells: int = 0
    reports: list = field(default_factory=list)


def step_rng(seed: int, t: int) -> np.random.Generator:
    """Stateless per-step generator so runs resume exactly after reload."""
    return np.random.Generator(
        np.random.Philox(key=((seed & ((1 << 64) - 1)) << 64) | (t & ((1 << 64) - 1))))


def run_training(trainer: Trainer, dataset, batch_size: int, stop: StopRule,
                 seed: int, mode: str = "sample",
                 keep_reports: bool = False) -> TrainingLog:
    """Drive a trainer over a dataset.

    mode "sample": each step draws batch_size examples uniformly with
    replacement. mode "epoch": one shuffled pass, consecutive slices of
    batch_size, ceil(n/b) steps in total (the step cap still applies).
    """
    from .data import make_minibatch  # local import to avoid a cycle

    n = dataset.n
    log = TrainingLog()
    if mode == "epoch":
        perm = step_rng(seed, 1 << 63).permutation(n)
        total = min((n + batch_size - 1) // batch_size, stop.max_steps)
    else:
        total = stop.max_steps
    below = 0
    window_best = np.inf
    overall_best = np.inf
    stale_windows = 0
    while log.steps < total:
        t = trainer.t
        if mode == "epoch":
            idx = perm[t * batch_size:(t + 1) * batch_size]
            if len(idx) == 0:
                break
        else:
            idx = step_rng(seed, t).integers(0, n, size=batch_size)
        batch = make_minibatch(dataset, idx)
        try:
            report = trainer.step(batch)
        except NonFiniteGradientError:
            log.diverged = True
            break
        log.steps += 1
        log.final_grad_norm = report.grad_norm
        log.peak_cells = max(log.peak_cells, report.peak_cells)
        if keep_reports:
            log.reports.append(report)
        if stop.grad_tol > 0:
            below = below + 1 if report.grad_norm < stop.grad_tol else 0
            if below >= stop.patience:
                log.converged = True
                break
        if stop.stall_window > 0:
            window_best = min(window_best, report.grad_norm)
            if log.steps % stop.stall_window == 0:
                if window_best < overall_best * (1.0 - stop.stall_rtol):
                    overall_best = window_best
                    stale_windows = 0
                else:
                    stale_windows += 1
                    if stale_windows >= stop.stall_windows:
                        log.stalled = True
                        break
                window_best = np.inf
    return log


def fh_train(config: TrainerConfig, dataset, batch_size: int = 1,
             seed: int = 0) -> FHTrainer:
    """Single-epoch feature-hashing training pass, returning the model."""
    trainer = FHTrainer(config)
    stop = StopRule(max_steps=(dataset.n + batch_size - 1) // batch_size)
    run_training(trainer, dataset, batch_size, stop, seed, mode="epoch")
    return trainer


def fh_predict(model: FHTrainer, x: SparseVec):
    return predict(model, x)


# ---------------------------------------------------------------------------
# Checkpointing

_CKPT_MAGIC = b"SKCP"
_CKPT_VERSION = 1


def _write_svec(fp: BinaryIO, v: SparseVec) -> None:
    fp.write(struct.pack("<Q", v.nnz))
    fp.write(v.ids.astype("<u8", copy=False).tobytes())
    fp.write(v.vals.astype("<f8", copy=False).tobytes())


def _read_svec(fp: BinaryIO) -> SparseVec:
    (n,) = struct.unpack("<Q", fp.read(8))
    ids = np.frombuffer(fp.read(8 * n), dtype="<u8").astype(np.uint64)
    vals = np.frombuffer(fp.read(8 * n), dtype="<f8").astype(np.float64)
    return SparseVec(ids, vals, _trusted=True)


def _write_blob(fp: BinaryIO, blob: bytes) -> None:
    fp.write(struct.pack("<I", len(blob)))
    fp.write(blob)


def _read_blob(fp: BinaryIO) -> bytes:
    (n,) = struct.unpack("<I", fp.read(4))
    return fp.read(n)


def save_checkpoint(trainer: Trainer, fp: BinaryIO) -> None:
    """Sketch blobs + heap CSVs + length-prefixed curvature pairs (sketched
    algos), or the dense weight array (dense algos)."""
    cfg = trainer.config
    meta = {
        "algo": cfg.algo, "task": cfg.task, "n_classes": cfg.n_classes,
        "rows": cfg.rows, "width": cfg.width, "topk": cfg.topk,
        "tau": cfg.tau, "dim": cfg.dim, "fh_size": cfg.fh_size,
        "seed": cfg.seed, "curvature_floor": cfg.curvature_floor,
        "schedule": {"kind": cfg.schedule.kind, "eta0": cfg.schedule.eta0,
                     "t0": cfg.schedule.t0},
        "t": trainer.t,
    }
    fp.write(_CKPT_MAGIC)
    fp.write(struct.pack("<I", _CKPT_VERSION))
    _write_blob(fp, json.dumps(meta, sort_keys=True).encode())
    if cfg.algo in ("bear", "mission"):
        for c in range(trainer.n_weights):
            trainer.sketches[c].save(fp)
            _write_blob(fp, trainer.heaps[c].to_csv().encode())
            if cfg.algo == "bear":
                _write_history(fp, trainer.histories[c])
    else:
        fp.write(trainer.weights.astype("<f8", copy=False).tobytes())
        if cfg.algo == "olbfgs":
            for c in range(trainer.n_weights):
                _write_history(fp, trainer.histories[c])


def _write_history(fp: BinaryIO, history: CurvatureHistory) -> None:
    pairs = list(history.pairs)
    fp.write(struct.pack("<I", len(pairs)))
    for pair in pairs:
        _write_svec(fp, pair.s)
        _write_svec(fp, pair.r)
        fp.write(struct.pack("<d", pair.rho))


def _read_history(fp: BinaryIO, capacity: int,
                  floor: float) -> CurvatureHistory:
    (count,) = struct.unpack("<I", fp.read(4))
    history = CurvatureHistory(capacity, floor)
    for _ in range(count):
        s = _read_svec(fp)
        r = _read_svec(fp)
        (rho,) = struct.unpack("<d", fp.read(8))
        history.pairs.append(CurvaturePair(s, r, rho))
    return history


def load_checkpoint(fp: BinaryIO) -> Trainer:
    magic = fp.read(4)
    if magic != _CKPT_MAGIC:
        raise ValueError(f"bad checkpoint magic {magic!r}")
    (version,) = struct.unpack("<I", fp.read(4))
    if version != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    meta = json.loads(_read_blob(fp).decode())
    schedule = StepSchedule(**meta.pop("schedule"))
    t = meta.pop("t")
    config = TrainerConfig(schedule=schedule, **meta)
    trainer = make_trainer(config)
    trainer.t = t
    if config.algo in ("bear", "mission"):
        for c in range(trainer.n_weights):
            trainer.sketches[c] = CountSketchTable.load(fp)
            heap = TopKHeap(config.topk)
            csv_lines = _read_blob(fp).decode().strip().splitlines()[1:]
            for line in csv_lines:
                fid, w = line.split(",")
                heap.offer(int(fid), float(w))
            trainer.heaps[c] = heap
            if config.algo == "bear":
                trainer.histories[c] = _read_history(
                    fp, config.tau, config.curvature_floor)
    else:
        shape = trainer.weights.shape
        raw = fp.read(shape[0] * shape[1] * 8)
        trainer.weights[:] = np.frombuffer(raw, dtype="<f8").reshape(shape)
        if config.algo == "olbfgs":
            for c in range(trainer.n_weights):
                trainer.histories[c] = _read_history(
                    fp, config.tau, config.curvature_floor)
    return trainer

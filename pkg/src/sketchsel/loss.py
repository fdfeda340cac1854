"""Minibatch loss gradients: MSE, binary cross-entropy, softmax cross-entropy.

Gradients are means over the batch (so step sizes are batch-size
invariant) and their support never exceeds the union of the example
supports. Each Minibatch caches a CSR-style view of its examples because
the second-order trainer evaluates two gradients on the same batch.
"""

from __future__ import annotations

import numpy as np

from .svec import SparseVec


class Minibatch:
    """b examples of (sparse features, label)."""

    __slots__ = ("examples", "b", "_ids", "_vals", "_rows", "_active",
                 "_cols", "_labels")

    def __init__(self, examples: list[tuple[SparseVec, float]]):
        if not examples:
            raise ValueError("a minibatch needs at least one example")
        self.examples = examples
        self.b = len(examples)
        self._ids = None
        self._vals = None
        self._rows = None
        self._active = None
        self._cols = None
        self._labels = None

    @classmethod
    def from_dense_rows(cls, ids: np.ndarray, rows: np.ndarray,
                        labels: np.ndarray) -> "Minibatch":
        """Fast path for dense data: every row shares one sorted id array."""
        examples = [(SparseVec(ids, rows[i], _trusted=True), labels[i])
                    for i in range(rows.shape[0])]
        batch = cls(examples)
        b, width = rows.shape
        batch._ids = np.tile(ids, b)
        batch._vals = rows.reshape(-1)
        batch._rows = np.repeat(np.arange(b), width)
        batch._active = ids
        batch._cols = np.tile(np.arange(width), b)
        return batch

    def _build(self) -> None:
        if self._active is not None:
            return
        ids = np.concatenate([x.ids for x, _ in self.examples])
        self._vals = np.concatenate([x.vals for x, _ in self.examples])
        self._rows = np.repeat(np.arange(self.b),
                               [x.nnz for x, _ in self.examples])
        self._active = np.unique(ids)
        self._cols = np.searchsorted(self._active, ids)
        self._ids = ids

    @property
    def active_ids(self) -> np.ndarray:
        """Sorted union of the example supports (the batch's active set)."""
        self._build()
        return self._active

    def labels(self) -> np.ndarray:
        if self._labels is None:
            self._labels = np.array([y for _, y in self.examples],
                                    dtype=np.float64)
        return self._labels

    def _beta_local(self, beta: SparseVec) -> np.ndarray:
        """beta's values aligned to the active set (absent ids are zero)."""
        self._build()
        local = np.zeros(len(self._active))
        if beta.nnz and len(self._active):
            pos = np.searchsorted(self._active, beta.ids)
            pos_c = np.minimum(pos, len(self._active) - 1)
            hit = self._active[pos_c] == beta.ids
            local[pos_c[hit]] = beta.vals[hit]
        return local

    def scores(self, beta: SparseVec) -> np.ndarray:
        """Per-example dot(x_i, beta)."""
        self._build()
        contrib = self._vals * self._beta_local(beta)[self._cols]
        return np.bincount(self._rows, weights=contrib, minlength=self.b)

    def accumulate(self, residuals: np.ndarray) -> SparseVec:
        """sum_i residuals[i] * x_i as a sparse vector over the active set."""
        self._build()
        weighted = self._vals * residuals[self._rows]
        dense = np.bincount(self._cols, weights=weighted,
                            minlength=len(self._active))
        keep = dense != 0.0
        return SparseVec(self._active[keep], dense[keep], _trusted=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def grad_mse(beta: SparseVec, batch: Minibatch) -> SparseVec:
    """Mean gradient of 0.5*(x.beta - y)^2 over the batch."""
    residuals = (batch.scores(beta) - batch.labels()) / batch.b
    return batch.accumulate(residuals)


def grad_logistic(beta: SparseVec, batch: Minibatch) -> SparseVec:
    """Mean gradient of binary cross-entropy with labels in {0, 1}."""
    residuals = (sigmoid(batch.scores(beta)) - batch.labels()) / batch.b
    return batch.accumulate(residuals)


def softmax_probs(betas: list[SparseVec], batch: Minibatch) -> np.ndarray:
    """(b, C) class probabilities under the per-class score vectors."""
    scores = np.stack([batch.scores(beta) for beta in betas], axis=1)
    scores -= scores.max(axis=1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=1, keepdims=True)
    return scores


def softmax_residuals(betas: list[SparseVec], batch: Minibatch) -> np.ndarray:
    """(b, C) matrix of (p_ic - 1{y_i = c}) / b."""
    probs = softmax_probs(betas, batch)
    y = batch.labels().astype(np.int64)
    probs[np.arange(batch.b), y] -= 1.0
    return probs / batch.b


def grad_softmax(betas: list[SparseVec], batch: Minibatch,
                 cls: int) -> SparseVec:
    """Mean gradient of multinomial cross-entropy for one class."""
    if not 0 <= cls < len(betas):
        raise ValueError(f"class {cls} out of range [0, {len(betas)})")
    return batch.accumulate(softmax_residuals(betas, batch)[:, cls])

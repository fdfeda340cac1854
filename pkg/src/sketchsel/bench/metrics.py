"""Evaluation metrics for the experiment harness."""

from __future__ import annotations

import numpy as np

from ..svec import SparseVec, axpy


def success_metric(selected: set[int], truth: set[int]) -> bool:
    """Exact support recovery: every ground-truth feature was selected."""
    return truth <= selected


def l2_error(beta_hat: SparseVec, beta_star: SparseVec) -> float:
    """Euclidean norm of (estimate - truth)."""
    return axpy(-1.0, beta_star, beta_hat).norm()


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score+ > score-) + 0.5 * P(tie).

    Ties get average ranks, which credits exactly half a pair. Raises on
    single-class input (the statistic is undefined there).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    # average ranks over runs of equal scores
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(scores)]])
    for a, b in zip(starts, ends):
        ranks[order[a:b]] = 0.5 * (a + 1 + b)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2)
                 / (n_pos * n_neg))


def accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    return float(np.mean(predicted == labels))

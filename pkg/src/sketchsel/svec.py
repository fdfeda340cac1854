"""Sparse vectors over unbounded non-negative feature ids.

The carrier type for gradients, descent directions, curvature pairs, and
restricted weight estimates. Entries are (id, value) pairs held as a pair
of aligned arrays with strictly increasing uint64 ids. Values are finite;
exact zeros are dropped by arithmetic (canonical form) so nnz stays
meaningful for memory accounting. Instances are treated as immutable.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from . import _kernels

_EMPTY_IDS = np.empty(0, dtype=np.uint64)
_EMPTY_VALS = np.empty(0, dtype=np.float64)


class SparseVec:
    __slots__ = ("ids", "vals")

    def __init__(self, ids, vals, *, _trusted: bool = False):
        if _trusted:
            self.ids = ids
            self.vals = vals
            return
        ids = np.ascontiguousarray(ids, dtype=np.uint64)
        vals = np.ascontiguousarray(vals, dtype=np.float64)
        if ids.shape != vals.shape or ids.ndim != 1:
            raise ValueError("ids and vals must be aligned 1-d arrays")
        if len(ids) > 1 and not np.all(ids[:-1] < ids[1:]):
            raise ValueError("feature ids must be strictly increasing")
        if len(vals) and not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        self.ids = ids
        self.vals = vals

    @classmethod
    def empty(cls) -> "SparseVec":
        return cls(_EMPTY_IDS, _EMPTY_VALS, _trusted=True)

    @classmethod
    def from_items(cls, items: Iterable[tuple[int, float]]) -> "SparseVec":
        """Build from (id, value) pairs in any order; duplicate ids are summed."""
        pairs = list(items)
        if not pairs:
            return cls.empty()
        ids = np.array([p[0] for p in pairs], dtype=np.uint64)
        vals = np.array([p[1] for p in pairs], dtype=np.float64)
        order = np.argsort(ids, kind="stable")
        ids, vals = ids[order], vals[order]
        uids, start = np.unique(ids, return_index=True)
        summed = np.add.reduceat(vals, start)
        return cls(uids, summed)

    @classmethod
    def from_dense(cls, dense, first_id: int = 0) -> "SparseVec":
        """Nonzero entries of a dense array, ids offset by first_id."""
        dense = np.asarray(dense, dtype=np.float64)
        idx = np.flatnonzero(dense)
        ids = idx.astype(np.uint64) + np.uint64(first_id)
        return cls(ids, dense[idx].copy(), _trusted=True)

    @property
    def nnz(self) -> int:
        return len(self.ids)

    def norm_sq(self) -> float:
        return float(np.dot(self.vals, self.vals))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def scaled(self, alpha: float) -> "SparseVec":
        if alpha == 0.0:
            return SparseVec.empty()
        return SparseVec(self.ids, alpha * self.vals, _trusted=True)

    def to_dense(self, size: int, first_id: int = 0) -> np.ndarray:
        out = np.zeros(size)
        out[(self.ids - np.uint64(first_id)).astype(np.intp)] = self.vals
        return out

    def get(self, feature: int) -> float:
        pos = np.searchsorted(self.ids, np.uint64(feature))
        if pos < len(self.ids) and self.ids[pos] == np.uint64(feature):
            return float(self.vals[pos])
        return 0.0

    def items(self) -> list[tuple[int, float]]:
        return [(int(i), float(v)) for i, v in zip(self.ids, self.vals)]

    def __len__(self) -> int:
        return len(self.ids)

    def __repr__(self) -> str:
        body = ", ".join(f"{i}: {v:g}" for i, v in self.items()[:8])
        tail = ", ..." if self.nnz > 8 else ""
        return f"SparseVec({{{body}{tail}}}, nnz={self.nnz})"


def dot(a: SparseVec, b: SparseVec) -> float:
    """Sum of a_i * b_i over the shared support."""
    return float(_kernels.sparse_dot(a.ids, a.vals, b.ids, b.vals))


def axpy(alpha: float, x: SparseVec, y: SparseVec) -> SparseVec:
    """alpha*x + y with merged sorted support; exact zeros dropped."""
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    ids, vals = _kernels.sparse_axpy(alpha, x.ids, x.vals, y.ids, y.vals)
    return SparseVec(ids, vals, _trusted=True)


def restrict(v: SparseVec, keep) -> SparseVec:
    """Entries of v whose id is in keep; everything else dropped."""
    keep_ids = as_id_array(keep)
    if len(keep_ids) == 0 or v.nnz == 0:
        return SparseVec.empty()
    mask = np.isin(v.ids, keep_ids, assume_unique=True)
    return SparseVec(v.ids[mask], v.vals[mask].copy(), _trusted=True)


def as_id_array(ids) -> np.ndarray:
    """Normalize an id collection to a sorted unique uint64 array."""
    if isinstance(ids, np.ndarray) and ids.dtype == np.uint64:
        return ids
    if isinstance(ids, (set, frozenset, list, tuple)):
        arr = np.fromiter(ids, dtype=np.uint64, count=len(ids))
        arr.sort()
        return arr
    return np.unique(np.asarray(ids, dtype=np.uint64))

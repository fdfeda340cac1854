"""Limited-memory BFGS over sparse vectors.

Keeps a ring of the most recent curvature pairs (s, r) = (iterate
difference, gradient difference over the same minibatch) and computes the
inverse-Hessian-times-gradient product with the standard two-loop
recursion. Stochastic pairs can carry non-positive curvature, so a pair is
stored only if r.s exceeds a small multiple of |s|^2; skipping bad pairs
keeps the implied inverse Hessian positive definite and the output a
descent direction. Cost is O(tau * nnz) per direction.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .svec import SparseVec, axpy, dot

CURVATURE_FLOOR = 1e-10


@dataclass(frozen=True)
class CurvaturePair:
    s: SparseVec
    r: SparseVec
    rho: float  # 1 / dot(r, s), finite and positive


class CurvatureHistory:
    """Ring buffer of at most `capacity` pairs, oldest first."""

    def __init__(self, capacity: int, curvature_floor: float = CURVATURE_FLOOR):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.curvature_floor = float(curvature_floor)
        self.pairs: deque[CurvaturePair] = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.pairs)

    def push_pair(self, s: SparseVec, r: SparseVec) -> bool:
        """Store (s, r) if it carries usable positive curvature.

        Returns False (history unchanged) for degenerate or
        negative-curvature pairs; that is a normal outcome under noise.
        """
        ss = s.norm_sq()
        if ss == 0.0:
            return False
        rs = dot(r, s)
        if rs <= self.curvature_floor * ss:
            return False
        self.pairs.append(CurvaturePair(s, r, 1.0 / rs))
        return True


def direction(g: SparseVec, history: CurvatureHistory) -> SparseVec:
    """Two-loop recursion: the stored pairs' inverse-Hessian applied to g.

    Backward pass newest-to-oldest computes alpha_i and peels r_i off the
    running q; the initial scaling uses the newest pair; the forward pass
    oldest-to-newest adds s_i back in. With no history the result is g
    itself (identity scaling). For g != 0 the output z satisfies
    dot(g, z) > 0.
    """
    pairs = list(history.pairs) if history is not None else []
    if not pairs:
        return g
    q = g
    alphas = []
    for pair in reversed(pairs):
        alpha = pair.rho * dot(pair.s, q)
        q = axpy(-alpha, pair.r, q)
        alphas.append(alpha)
    alphas.reverse()
    newest = pairs[-1]
    gamma = (1.0 / newest.rho) / dot(newest.r, newest.r)
    z = q.scaled(gamma)
    for pair, alpha in zip(pairs, alphas):
        beta = pair.rho * dot(pair.r, z)
        z = axpy(alpha - beta, pair.s, z)
    return z

"""NumPy fallback for the hot kernels.

Bit-compatible with the compiled backend for all integer outputs (hashes,
buckets, signs). Floating-point reductions may differ from the compiled
backend at machine precision because NumPy uses pairwise summation.

Hash scheme: a 32-bit MurmurHash3-style mix of the 8 little-endian bytes of
the feature id, seeded per (table seed, row, purpose) lane. All arithmetic
is done in uint64 and masked to 32 bits after each multiply so the results
are identical on every platform.
"""

from __future__ import annotations

import numpy as np

BACKEND = "ref"

_M32 = np.uint64(0xFFFFFFFF)
_C1 = np.uint64(0xCC9E2D51)
_C2 = np.uint64(0x1B873593)
_C3 = np.uint64(0xE6546B64)
_F1 = np.uint64(0x85EBCA6B)
_F2 = np.uint64(0xC2B2AE35)
_FIVE = np.uint64(5)
_EIGHT = np.uint64(8)  # key length in bytes


def _rotl32(x: np.ndarray, r: int) -> np.ndarray:
    return ((x << np.uint64(r)) | (x >> np.uint64(32 - r))) & _M32


def hash_u64(ids: np.ndarray, lane_seed: int) -> np.ndarray:
    """32-bit hash of each uint64 id under one lane seed (values < 2**32)."""
    x = np.ascontiguousarray(ids, dtype=np.uint64)
    h = np.full(x.shape, np.uint64(lane_seed), dtype=np.uint64)

    k = x & _M32
    k = (k * _C1) & _M32
    k = _rotl32(k, 15)
    k = (k * _C2) & _M32
    h ^= k
    h = _rotl32(h, 13)
    h = (h * _FIVE + _C3) & _M32

    k = x >> np.uint64(32)
    k = (k * _C1) & _M32
    k = _rotl32(k, 15)
    k = (k * _C2) & _M32
    h ^= k
    h = _rotl32(h, 13)
    h = (h * _FIVE + _C3) & _M32

    h ^= _EIGHT
    h ^= h >> np.uint64(16)
    h = (h * _F1) & _M32
    h ^= h >> np.uint64(13)
    h = (h * _F2) & _M32
    h ^= h >> np.uint64(16)
    return h


def bucket_hash(lane_seed: int, width: int, ids: np.ndarray) -> np.ndarray:
    """Bucket index in [0, width) for each id."""
    return (hash_u64(ids, lane_seed) % np.uint64(width)).astype(np.int64)


def sign_hash(lane_seed: int, ids: np.ndarray) -> np.ndarray:
    """Sign in {+1.0, -1.0} for each id: +1 iff the hash's low bit is set."""
    low = hash_u64(ids, lane_seed) & np.uint64(1)
    return np.where(low == 1, 1.0, -1.0)


def sketch_add(counters: np.ndarray, index_seeds: np.ndarray,
               sign_seeds: np.ndarray, ids: np.ndarray,
               deltas: np.ndarray) -> None:
    """Scatter-add signed deltas into every row of the counter grid."""
    width = counters.shape[1]
    for j in range(counters.shape[0]):
        buckets = bucket_hash(int(index_seeds[j]), width, ids)
        signs = sign_hash(int(sign_seeds[j]), ids)
        np.add.at(counters[j], buckets, signs * deltas)


def sketch_query(counters: np.ndarray, index_seeds: np.ndarray,
                 sign_seeds: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Median over rows of the sign-corrected counters for each id."""
    d = counters.shape[0]
    width = counters.shape[1]
    est = np.empty((d, len(ids)))
    for j in range(d):
        buckets = bucket_hash(int(index_seeds[j]), width, ids)
        est[j] = sign_hash(int(sign_seeds[j]), ids) * counters[j, buckets]
    return np.median(est, axis=0)


def sparse_dot(aid: np.ndarray, av: np.ndarray,
               bid: np.ndarray, bv: np.ndarray) -> float:
    """Inner product of two id-sorted sparse vectors."""
    if len(aid) == 0 or len(bid) == 0:
        return 0.0
    _, ia, ib = np.intersect1d(aid, bid, assume_unique=True,
                               return_indices=True)
    if len(ia) == 0:
        return 0.0
    return float(np.dot(av[ia], bv[ib]))


def sparse_axpy(alpha: float, xid: np.ndarray, xv: np.ndarray,
                yid: np.ndarray, yv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """alpha*x + y over merged sorted support, exact zeros dropped."""
    if len(xid) == 0 or alpha == 0.0:
        keep = yv != 0.0
        return yid[keep], yv[keep]
    if len(yid) == 0:
        out = alpha * xv
        keep = out != 0.0
        return xid[keep], out[keep]
    ids = np.concatenate([xid, yid])
    vals = np.concatenate([alpha * xv, yv])
    uids, inv = np.unique(ids, return_inverse=True)
    out = np.bincount(inv, weights=vals, minlength=len(uids))
    keep = out != 0.0
    return uids[keep], out[keep]

# cython: language_level=3
"""Compiled kernels: hashing, sketch scatter/gather, sorted-sparse merges.

Integer outputs (hashes, buckets, signs) are bit-identical to the NumPy
fallback in _ref.py; float reductions may differ at machine precision
because summation order differs.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.stdint cimport int64_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc

cnp.import_array()

BACKEND = "fast"

cdef extern from *:
    """
    #include <stdint.h>

    static inline uint32_t rotl32(uint32_t x, int r) {
        return (x << r) | (x >> (32 - r));
    }

    static inline uint32_t mmh32_u64(uint64_t key, uint32_t seed) {
        uint32_t h = seed;
        uint32_t k = (uint32_t)(key & 0xFFFFFFFFu);
        k *= 0xCC9E2D51u; k = rotl32(k, 15); k *= 0x1B873593u;
        h ^= k; h = rotl32(h, 13); h = h * 5u + 0xE6546B64u;
        k = (uint32_t)(key >> 32);
        k *= 0xCC9E2D51u; k = rotl32(k, 15); k *= 0x1B873593u;
        h ^= k; h = rotl32(h, 13); h = h * 5u + 0xE6546B64u;
        h ^= 8u;
        h ^= h >> 16; h *= 0x85EBCA6Bu;
        h ^= h >> 13; h *= 0xC2B2AE35u;
        h ^= h >> 16;
        return h;
    }
    """
    uint32_t mmh32_u64(uint64_t key, uint32_t seed) nogil


def hash_u64(ids, lane_seed):
    """32-bit hash of each uint64 id under one lane seed (values < 2**32)."""
    cdef uint64_t[::1] x = np.ascontiguousarray(ids, dtype=np.uint64)
    cdef uint32_t seed = <uint32_t> lane_seed
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = mmh32_u64(x[i], seed)
    return out_arr


def bucket_hash(lane_seed, width, ids):
    """Bucket index in [0, width) for each id."""
    cdef uint64_t[::1] x = np.ascontiguousarray(ids, dtype=np.uint64)
    cdef uint32_t seed = <uint32_t> lane_seed
    cdef uint64_t c = <uint64_t> width
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = <int64_t> ((<uint64_t> mmh32_u64(x[i], seed)) % c)
    return out_arr


def sign_hash(lane_seed, ids):
    """Sign in {+1.0, -1.0} for each id: +1 iff the hash's low bit is set."""
    cdef uint64_t[::1] x = np.ascontiguousarray(ids, dtype=np.uint64)
    cdef uint32_t seed = <uint32_t> lane_seed
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = 1.0 if (mmh32_u64(x[i], seed) & 1u) else -1.0
    return out_arr


def sketch_add(counters, index_seeds, sign_seeds, ids, deltas):
    """Scatter-add signed deltas into every row of the counter grid."""
    cdef double[:, ::1] grid = counters
    cdef uint32_t[::1] iseeds = np.ascontiguousarray(index_seeds, dtype=np.uint32)
    cdef uint32_t[::1] sseeds = np.ascontiguousarray(sign_seeds, dtype=np.uint32)
    cdef uint64_t[::1] x = np.ascontiguousarray(ids, dtype=np.uint64)
    cdef double[::1] dv = np.ascontiguousarray(deltas, dtype=np.float64)
    cdef Py_ssize_t d = grid.shape[0], n = x.shape[0], i, j
    cdef uint64_t c = <uint64_t> grid.shape[1]
    cdef uint64_t b
    cdef double s
    with nogil:
        for j in range(d):
            for i in range(n):
                b = (<uint64_t> mmh32_u64(x[i], iseeds[j])) % c
                s = 1.0 if (mmh32_u64(x[i], sseeds[j]) & 1u) else -1.0
                grid[j, b] += s * dv[i]


def sketch_query(counters, index_seeds, sign_seeds, ids):
    """Median over rows of the sign-corrected counters for each id."""
    cdef double[:, ::1] grid = counters
    cdef uint32_t[::1] iseeds = np.ascontiguousarray(index_seeds, dtype=np.uint32)
    cdef uint32_t[::1] sseeds = np.ascontiguousarray(sign_seeds, dtype=np.uint32)
    cdef uint64_t[::1] x = np.ascontiguousarray(ids, dtype=np.uint64)
    cdef Py_ssize_t d = grid.shape[0], n = x.shape[0], i, j, p
    cdef uint64_t c = <uint64_t> grid.shape[1]
    cdef uint64_t b
    cdef double v
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double* buf = <double*> malloc(d * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                for j in range(d):
                    b = (<uint64_t> mmh32_u64(x[i], iseeds[j])) % c
                    v = grid[j, b]
                    if not (mmh32_u64(x[i], sseeds[j]) & 1u):
                        v = -v
                    # insertion sort keeps buf[0..j] ordered
                    p = j
                    while p > 0 and buf[p - 1] > v:
                        buf[p] = buf[p - 1]
                        p -= 1
                    buf[p] = v
                if d & 1:
                    out[i] = buf[d // 2]
                else:
                    out[i] = (buf[d // 2 - 1] + buf[d // 2]) / 2.0
    finally:
        free(buf)
    return out_arr


def sparse_dot(aid, av, bid, bv):
    """Inner product of two id-sorted sparse vectors."""
    cdef uint64_t[::1] ai = aid
    cdef double[::1] axv = av
    cdef uint64_t[::1] bi = bid
    cdef double[::1] bxv = bv
    cdef Py_ssize_t na = ai.shape[0], nb = bi.shape[0], i = 0, j = 0
    cdef double acc = 0.0
    with nogil:
        while i < na and j < nb:
            if ai[i] < bi[j]:
                i += 1
            elif ai[i] > bi[j]:
                j += 1
            else:
                acc += axv[i] * bxv[j]
                i += 1
                j += 1
    return acc


def sparse_axpy(alpha, xid, xv, yid, yv):
    """alpha*x + y over merged sorted support, exact zeros dropped."""
    cdef double a = alpha
    cdef uint64_t[::1] xi = xid
    cdef double[::1] xxv = xv
    cdef uint64_t[::1] yi = yid
    cdef double[::1] yyv = yv
    cdef Py_ssize_t nx = xi.shape[0], ny = yi.shape[0]
    cdef Py_ssize_t i = 0, j = 0, k = 0
    cdef double v

    if nx == 0 or a == 0.0:
        keep = np.asarray(yv) != 0.0
        return np.asarray(yid)[keep], np.asarray(yv)[keep]

    out_ids_arr = np.empty(nx + ny, dtype=np.uint64)
    out_vals_arr = np.empty(nx + ny, dtype=np.float64)
    cdef uint64_t[::1] oi = out_ids_arr
    cdef double[::1] ov = out_vals_arr
    with nogil:
        while i < nx and j < ny:
            if xi[i] < yi[j]:
                v = a * xxv[i]
                if v != 0.0:
                    oi[k] = xi[i]
                    ov[k] = v
                    k += 1
                i += 1
            elif xi[i] > yi[j]:
                if yyv[j] != 0.0:
                    oi[k] = yi[j]
                    ov[k] = yyv[j]
                    k += 1
                j += 1
            else:
                v = a * xxv[i] + yyv[j]
                if v != 0.0:
                    oi[k] = xi[i]
                    ov[k] = v
                    k += 1
                i += 1
                j += 1
        while i < nx:
            v = a * xxv[i]
            if v != 0.0:
                oi[k] = xi[i]
                ov[k] = v
                k += 1
            i += 1
        while j < ny:
            if yyv[j] != 0.0:
                oi[k] = yi[j]
                ov[k] = yyv[j]
                k += 1
            j += 1
    return out_ids_arr[:k], out_vals_arr[:k]

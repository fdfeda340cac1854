"""Backend parity: the compiled kernels and the NumPy fallback must agree."""

import numpy as np
import pytest

from sketchsel._kernels import _ref

try:
    from sketchsel._kernels import _fast
except ImportError:
    _fast = None

needs_fast = pytest.mark.skipif(_fast is None,
                                reason="compiled kernels not built")

RNG = np.random.default_rng(7)
IDS = np.concatenate([
    RNG.integers(0, 1 << 20, size=500).astype(np.uint64),
    RNG.integers(0, 1 << 63, size=500).astype(np.uint64),
    np.array([0, 1, 2**32 - 1, 2**32, 2**64 - 1], dtype=np.uint64),
])


@needs_fast
def test_hash_u64_identical():
    for seed in (0, 1, 0xDEADBEEF, 2**32 - 1):
        np.testing.assert_array_equal(_ref.hash_u64(IDS, seed),
                                      _fast.hash_u64(IDS, seed))


@needs_fast
def test_bucket_and_sign_identical():
    for width in (1, 7, 150, 65536):
        np.testing.assert_array_equal(_ref.bucket_hash(99, width, IDS),
                                      _fast.bucket_hash(99, width, IDS))
    np.testing.assert_array_equal(_ref.sign_hash(99, IDS),
                                  _fast.sign_hash(99, IDS))


@needs_fast
def test_sketch_add_and_query_identical():
    iseeds = np.array([11, 22, 33, 44, 55], dtype=np.uint32)
    sseeds = np.array([66, 77, 88, 99, 111], dtype=np.uint32)
    deltas = RNG.standard_normal(len(IDS))
    grid_a = np.zeros((5, 64))
    grid_b = np.zeros((5, 64))
    _ref.sketch_add(grid_a, iseeds, sseeds, IDS, deltas)
    _fast.sketch_add(grid_b, iseeds, sseeds, IDS, deltas)
    np.testing.assert_array_equal(grid_a, grid_b)

    probe = np.unique(IDS)
    qa = _ref.sketch_query(grid_a, iseeds, sseeds, probe)
    qb = _fast.sketch_query(grid_b, iseeds, sseeds, probe)
    np.testing.assert_array_equal(qa, qb)


@needs_fast
def test_sketch_query_even_rows_identical():
    iseeds = np.array([5, 6], dtype=np.uint32)
    sseeds = np.array([7, 8], dtype=np.uint32)
    grid = RNG.standard_normal((2, 16))
    probe = np.arange(100, dtype=np.uint64)
    np.testing.assert_array_equal(
        _ref.sketch_query(grid.copy(), iseeds, sseeds, probe),
        _fast.sketch_query(grid.copy(), iseeds, sseeds, probe))


def _rand_svec(rng, n, id_range):
    ids = np.unique(rng.integers(0, id_range, size=n).astype(np.uint64))
    vals = rng.standard_normal(len(ids))
    return ids, vals


@needs_fast
def test_sparse_merge_ops_agree():
    rng = np.random.default_rng(21)
    for _ in range(50):
        aid, av = _rand_svec(rng, rng.integers(0, 40), 60)
        bid, bv = _rand_svec(rng, rng.integers(0, 40), 60)
        assert _ref.sparse_dot(aid, av, bid, bv) == pytest.approx(
            _fast.sparse_dot(aid, av, bid, bv), rel=1e-13, abs=1e-15)
        alpha = float(rng.standard_normal())
        ri, rv = _ref.sparse_axpy(alpha, aid, av, bid, bv)
        fi, fv = _fast.sparse_axpy(alpha, aid, av, bid, bv)
        np.testing.assert_array_equal(ri, fi)
        np.testing.assert_allclose(rv, fv, rtol=0, atol=0)  # identical ops


def test_hash_is_deterministic_across_calls():
    a = _ref.hash_u64(IDS, 1234)
    b = _ref.hash_u64(IDS.copy(), 1234)
    np.testing.assert_array_equal(a, b)

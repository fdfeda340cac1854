import io

import numpy as np
import pytest

from sketchsel.sketch import CountSketchTable, lane_seeds
from sketchsel.svec import SparseVec
from sketchsel import _kernels


def fresh(rows=3, width=16, seed=42):
    return CountSketchTable(rows=rows, width=width, seed=seed)


class TestHashIndex:
    def test_single_bucket_forces_zero(self):
        t = fresh(rows=4, width=1)
        for row in range(4):
            for feature in (0, 7, 2**50):
                assert t.hash_index(row, feature) == 0

    def test_deterministic(self):
        t = fresh()
        assert t.hash_index(2, 17) == t.hash_index(2, 17)
        t2 = fresh()
        assert t.hash_index(2, 17) == t2.hash_index(2, 17)

    def test_row_out_of_range(self):
        t = fresh()
        with pytest.raises(IndexError):
            t.hash_index(3, 0)
        with pytest.raises(IndexError):
            t.hash_sign(-1, 0)

    def test_uniformity_chi_square(self):
        """Bucket counts within 4 sigma of the chi-square expectation."""
        c, n = 256, 100_000
        t = CountSketchTable(rows=1, width=c, seed=2024)
        buckets = t.buckets(0, np.arange(n, dtype=np.uint64))
        counts = np.bincount(buckets, minlength=c)
        expected = n / c
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        dof = c - 1
        assert abs(chi2 - dof) <= 4.0 * np.sqrt(2.0 * dof)


class TestHashSign:
    def test_deterministic(self):
        t = fresh()
        assert t.hash_sign(1, 99) == t.hash_sign(1, 99)
        assert t.hash_sign(1, 99) in (-1, 1)

    def test_balanced(self):
        t = CountSketchTable(rows=1, width=8, seed=11)
        signs = t.signs(0, np.arange(100_000, dtype=np.uint64))
        assert 0.49 <= np.mean(signs == 1.0) <= 0.51

    def test_rows_independent(self):
        t = CountSketchTable(rows=2, width=8, seed=5)
        ids = np.arange(100_000, dtype=np.uint64)
        agree = np.mean(t.signs(0, ids) == t.signs(1, ids))
        assert 0.49 <= agree <= 0.51


class TestAddQuery:
    def test_fresh_queries_zero(self):
        t = fresh()
        assert t.query(12345) == 0.0

    def test_zero_increment_no_change(self):
        t = fresh()
        t.add(7, 0.0)
        assert np.all(t.counters == 0.0)

    def test_single_add_exact(self):
        t = fresh()
        t.add(9, 5.0)
        assert t.query(9) == 5.0

    def test_accumulation_linearity(self):
        a, b = fresh(), fresh()
        a.add(3, 2.0)
        a.add(3, 3.0)
        b.add(3, 5.0)
        np.testing.assert_array_equal(a.counters, b.counters)

    def test_rejects_non_finite(self):
        t = fresh()
        with pytest.raises(ValueError):
            t.add(1, float("inf"))
        assert np.all(t.counters == 0.0)

    def test_isolation_changes_exactly_d_cells(self):
        t = fresh(rows=5, width=64)
        t.add(1234, 1.5)
        assert np.count_nonzero(t.counters) == 5


class TestAddSparse:
    def test_empty_no_change(self):
        t = fresh()
        t.add_sparse(SparseVec.empty())
        assert np.all(t.counters == 0.0)

    def test_additive(self):
        a = SparseVec.from_items([(1, 2.0), (9, -1.0)])
        b = SparseVec.from_items([(1, 1.0), (4, 3.0)])
        t1, t2 = fresh(), fresh()
        t1.add_sparse(a)
        t1.add_sparse(b)
        from sketchsel.svec import axpy
        t2.add_sparse(axpy(1.0, a, b))
        np.testing.assert_allclose(t1.counters, t2.counters, atol=1e-15)

    def test_additive_inverse_restores_exactly(self):
        t = fresh(rows=5, width=32)
        base = SparseVec.from_items([(2, 1.25), (77, -3.5)])
        t.add_sparse(base)
        before = t.counters.copy()
        v = SparseVec.from_items([(5, 0.7), (2, -1.1), (900, 2.2)])
        t.add_sparse(v)
        t.add_sparse(v.scaled(-1.0))
        np.testing.assert_array_equal(t.counters, before)

    def test_linearity_bit_exact_integer_deltas(self):
        """Integer-valued adds in any grouping give the identical grid."""
        rng = np.random.default_rng(3)
        ids = np.unique(rng.integers(0, 1000, size=60).astype(np.uint64))
        deltas = rng.integers(-50, 50, size=len(ids)).astype(np.float64)
        one = fresh(rows=3, width=16, seed=9)
        one.add_sparse(SparseVec(ids, deltas))
        many = fresh(rows=3, width=16, seed=9)
        for i, d in zip(ids, deltas):
            half = float(np.trunc(d / 2))
            many.add(int(i), half)
            many.add(int(i), float(d) - half)
        np.testing.assert_array_equal(one.counters, many.counters)


def test_per_row_estimate_is_unbiased():
    """Across many seeds, a single-row estimate has mean ~ z_i (3 SE)."""
    p, c, n_seeds = 32, 8, 10_000
    rng = np.random.default_rng(0)
    z = rng.standard_normal(p)
    ids = np.arange(p, dtype=np.uint64)
    acc = np.zeros(p)
    acc_sq = np.zeros(p)
    for seed in range(n_seeds):
        iseeds, sseeds = lane_seeds(seed, 1)
        buckets = _kernels.bucket_hash(int(iseeds[0]), c, ids)
        signs = _kernels.sign_hash(int(sseeds[0]), ids)
        counters = np.bincount(buckets, weights=signs * z, minlength=c)
        est = signs * counters[buckets]
        acc += est
        acc_sq += est ** 2
    mean = acc / n_seeds
    se = np.sqrt((acc_sq / n_seeds - mean ** 2) / n_seeds)
    assert np.all(np.abs(mean - z) <= 3.0 * se + 1e-12)


def test_median_query_tolerates_minority_collisions():
    """With d rows, a planted collision in one row does not move the median."""
    t = fresh(rows=5, width=64, seed=21)
    t.add(10, 4.0)
    row = 2
    bucket = t.hash_index(row, 10)
    t.counters[row, bucket] += 100.0  # corrupt one row by hand
    assert t.query(10) == 4.0


class TestSerialization:
    def test_round_trip_bit_exact(self):
        t = fresh(rows=4, width=10, seed=77)
        rng = np.random.default_rng(1)
        t.counters[:] = rng.standard_normal((4, 10))
        buf = io.BytesIO()
        t.save(buf)
        buf.seek(0)
        back = CountSketchTable.load(buf)
        assert back == t
        assert back.seed == t.seed

    def test_bad_magic(self):
        with pytest.raises(ValueError):
            CountSketchTable.load(io.BytesIO(b"NOPE" + b"\0" * 32))

    def test_queries_survive_round_trip(self):
        t = fresh(rows=5, width=16, seed=3)
        t.add_sparse(SparseVec.from_items([(4, 1.5), (900, -2.0)]))
        buf = io.BytesIO()
        t.save(buf)
        buf.seek(0)
        back = CountSketchTable.load(buf)
        for f in (4, 900, 123456):
            assert back.query(f) == t.query(f)

import io

import numpy as np
import pytest

from sketchsel.data import (SyntheticDataset, SyntheticSpec, VWParseError,
                            dataset_from_text, format_vw, gen_synthetic,
                            load_vw, make_minibatch, murmur3_32, parse_vw)
from sketchsel.svec import SparseVec


class TestParseVw:
    def test_basic(self):
        x, y = parse_vw("1 | 3:0.5 7:2", task="binary")
        assert y == 1
        assert x.items() == [(3, 0.5), (7, 2.0)]

    def test_empty_features(self):
        x, y = parse_vw("0 |", task="binary")
        assert y == 0
        assert x.nnz == 0

    def test_duplicates_sum_default_value(self):
        x, y = parse_vw("1 | 3 3", task="binary")
        assert y == 1
        assert x.items() == [(3, 2.0)]

    def test_negative_binary_label(self):
        _, y = parse_vw("-1 | 1", task="binary")
        assert y == 0

    def test_regression_label(self):
        _, y = parse_vw("2.75 | 1:1", task="regression")
        assert y == 2.75

    def test_namespace_skipped(self):
        x, _ = parse_vw("1 |doc 3:0.5", task="binary")
        assert x.items() == [(3, 0.5)]

    def test_string_features_hash_deterministically(self):
        x1, _ = parse_vw("1 | shareholder company", task="binary")
        x2, _ = parse_vw("1 | company shareholder", task="binary")
        assert x1.items() == x2.items()
        assert x1.nnz == 2
        expected = murmur3_32(b"shareholder", 0x5EED1E55)
        assert expected in {i for i, _ in x1.items()}

    def test_malformed_label(self):
        with pytest.raises(VWParseError, match="line 4"):
            parse_vw("spam | 1:1", task="binary", lineno=4)

    def test_bad_binary_label_value(self):
        with pytest.raises(VWParseError):
            parse_vw("3 | 1:1", task="binary")

    def test_bad_feature_value(self):
        with pytest.raises(VWParseError):
            parse_vw("1 | 3:abc", task="binary")

    def test_no_bar_form(self):
        x, y = parse_vw("1 3:0.5", task="binary")
        assert y == 1 and x.items() == [(3, 0.5)]

    def test_round_trip(self):
        for line in ("1 | 3:0.5 7:2", "0 |", "1 | 2:-1.25 10:1e-3"):
            x, y = parse_vw(line, task="binary")
            x2, y2 = parse_vw(format_vw(x, y), task="binary")
            assert (x2.items(), y2) == (x.items(), y)


class TestLoadVw:
    TEXT = "1 | 1:1 5:2\n-1 | 2:1\n\n1 | 5:1\n"

    def test_stats(self):
        ds = dataset_from_text(self.TEXT, task="binary", name="toy")
        assert ds.n == 3
        assert ds.p == 6
        stats = ds.stats()
        assert stats.to_csv().splitlines()[0] == "name,p_observed,n,avg_active"
        assert stats.avg_active == pytest.approx((2 + 1 + 1) / 3)

    def test_multiclass_one_based_shifted(self):
        ds = dataset_from_text("1 | 1:1\n3 | 2:1\n2 | 3:1\n",
                               task="multiclass")
        assert sorted(y for _, y in ds.examples) == [0, 1, 2]
        assert ds.n_classes == 3

    def test_limit(self):
        ds = dataset_from_text(self.TEXT, task="binary", limit=2)
        assert ds.n == 2

    def test_parse_error_carries_line_number(self):
        with pytest.raises(VWParseError, match="line 2"):
            dataset_from_text("1 | 1:1\nbad line here\n", task="binary")


class TestSynthetic:
    def test_full_support_forced(self):
        for seed in range(5):
            ds, beta = gen_synthetic(SyntheticSpec(p=4, n=3, k=4, seed=seed))
            assert [i for i, _ in beta.items()] == [1, 2, 3, 4]

    def test_weights_in_range(self):
        _, beta = gen_synthetic(SyntheticSpec(p=100, n=5, k=10, seed=3))
        assert np.all(beta.vals >= 0.8) and np.all(beta.vals <= 1.2)

    def test_column_statistics(self):
        """Column means over many rows are within 4 sigma of zero."""
        ds = SyntheticDataset(SyntheticSpec(p=16, n=20_000, k=4, seed=7))
        ids, rows, _ = ds.dense_batch(range(ds.n))
        means = rows.mean(axis=0)
        bound = 4.0 / np.sqrt(ds.n)
        assert np.all(np.abs(means) <= bound)

    def test_labels_are_exact_linear_model(self):
        ds, beta = gen_synthetic(SyntheticSpec(p=30, n=10, k=5, seed=1))
        for i in range(ds.n):
            x, y = ds.example(i)
            expected = float(np.dot(x.to_dense(31, first_id=0)[1:],
                                    beta.to_dense(31, first_id=0)[1:]))
            assert y == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_deterministic_across_instances(self):
        a = SyntheticDataset(SyntheticSpec(p=50, n=20, k=3, seed=9))
        b = SyntheticDataset(SyntheticSpec(p=50, n=20, k=3, seed=9))
        np.testing.assert_array_equal(a.row(7), b.row(7))
        assert a.beta_star.items() == b.beta_star.items()

    def test_materialized_matches_streamed(self):
        ds = SyntheticDataset(SyntheticSpec(p=20, n=15, k=2, seed=4))
        cached = ds.materialized()
        for i in (0, 7, 14):
            xs, ys = ds.example(i)
            xc, yc = cached.example(i)
            np.testing.assert_array_equal(xs.vals, xc.vals)
            assert ys == yc

    def test_k_greater_than_p_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(p=3, n=5, k=4, seed=0)

    def test_random_access_any_order(self):
        ds = SyntheticDataset(SyntheticSpec(p=10, n=100, k=2, seed=2))
        r50_first = ds.row(50).copy()
        ds.row(3)
        np.testing.assert_array_equal(ds.row(50), r50_first)


def test_make_minibatch_paths_consistent():
    ds = SyntheticDataset(SyntheticSpec(p=12, n=30, k=3, seed=5))
    idx = [4, 9, 9, 20]
    fast = make_minibatch(ds, idx)

    class NoDense:
        n = ds.n

        def example(self, i):
            return ds.example(i)

    slow = make_minibatch(NoDense(), idx)
    beta = SparseVec.from_items([(1, 0.5), (12, -1.0)])
    np.testing.assert_allclose(fast.scores(beta), slow.scores(beta),
                               rtol=1e-15)

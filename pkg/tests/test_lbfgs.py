import numpy as np
import pytest

from sketchsel.lbfgs import CurvatureHistory, direction
from sketchsel.svec import SparseVec, dot


def e(i, value=1.0):
    return SparseVec.from_items([(i, value)])


def dense_inverse_oracle(pairs, dim):
    """Explicit BFGS inverse update H <- (I - rho s r^T) H (I - rho r s^T)
    + rho s s^T from H0 = (r_T.s_T / r_T.r_T) I, applied oldest to newest."""
    s_last, r_last = pairs[-1]
    h = np.eye(dim) * (r_last @ s_last) / (r_last @ r_last)
    eye = np.eye(dim)
    for s, r in pairs:
        rho = 1.0 / (r @ s)
        left = eye - rho * np.outer(s, r)
        h = left @ h @ left.T + rho * np.outer(s, s)
    return h


def random_history(rng, dim, tau):
    """Accepted random pairs plus their dense copies."""
    history = CurvatureHistory(tau)
    dense_pairs = []
    while len(dense_pairs) < tau:
        s = rng.standard_normal(dim)
        r = rng.standard_normal(dim)
        if r @ s <= 1e-3:  # keep test pairs clearly admissible
            continue
        assert history.push_pair(SparseVec.from_dense(s),
                                 SparseVec.from_dense(r))
        dense_pairs.append((s, r))
    return history, dense_pairs


class TestPushPair:
    def test_unit_pair_accepted(self):
        h = CurvatureHistory(3)
        assert h.push_pair(e(1), e(1))
        assert h.pairs[-1].rho == 1.0

    def test_negative_curvature_rejected(self):
        h = CurvatureHistory(3)
        assert not h.push_pair(e(1), e(1, -1.0))
        assert len(h) == 0

    def test_zero_s_rejected(self):
        h = CurvatureHistory(3)
        assert not h.push_pair(SparseVec.empty(), e(1))

    def test_ring_eviction(self):
        h = CurvatureHistory(2)
        for i in (1, 2, 3):
            assert h.push_pair(e(i), e(i))
        assert [p.s.items()[0][0] for p in h.pairs] == [2, 3]


class TestDirection:
    def test_empty_history_identity(self):
        g = SparseVec.from_items([(1, 2.0), (9, -1.0)])
        assert direction(g, CurvatureHistory(5)).items() == g.items()

    def test_single_unit_pair(self):
        h = CurvatureHistory(5)
        h.push_pair(e(1), e(1))
        out = direction(e(1), h)
        oracle = dense_inverse_oracle([(np.eye(2)[1], np.eye(2)[1])], 2)
        expected = oracle @ np.eye(2)[1]
        np.testing.assert_allclose(out.to_dense(2), expected, rtol=1e-12)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            dim = int(rng.integers(2, 11))
            tau = int(rng.integers(1, 4))
            history, dense_pairs = random_history(rng, dim, tau)
            g = rng.standard_normal(dim)
            out = direction(SparseVec.from_dense(g), history)
            expected = dense_inverse_oracle(dense_pairs, dim) @ g
            np.testing.assert_allclose(out.to_dense(dim), expected,
                                       rtol=1e-10, atol=1e-12)

    def test_descent_property(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            dim = int(rng.integers(2, 15))
            history, _ = random_history(rng, dim, int(rng.integers(1, 6)))
            g = SparseVec.from_dense(rng.standard_normal(dim))
            assert dot(g, direction(g, history)) > 0.0

    def test_scale_covariance(self):
        rng = np.random.default_rng(13)
        history, _ = random_history(rng, 8, 3)
        g = SparseVec.from_dense(rng.standard_normal(8))
        z = direction(g, history)
        z_scaled = direction(g.scaled(-2.5), history)
        np.testing.assert_allclose(z_scaled.to_dense(8), -2.5 * z.to_dense(8),
                                   rtol=1e-12)

    def test_support_bound(self):
        """support(z) stays inside support(g) with the stored pair supports."""
        h = CurvatureHistory(4)
        h.push_pair(SparseVec.from_items([(2, 1.0), (3, 0.5)]),
                    SparseVec.from_items([(2, 0.8), (4, 0.1)]))
        h.push_pair(SparseVec.from_items([(6, 1.0)]),
                    SparseVec.from_items([(6, 2.0)]))
        g = SparseVec.from_items([(1, 1.0), (2, -1.0)])
        allowed = {1, 2, 3, 4, 6}
        out = direction(g, h)
        assert {i for i, _ in out.items()} <= allowed

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from nslr import model, stationarity as st_
from nslr.errors import ConditionError
from nslr.model import Dataset
from nslr.stationarity import Iterate, Stationarity

from conftest import dense_newton_minimizer, random_dataset, sparse_minimizer_instance

vectors = arrays(np.float64, st.integers(1, 12), elements=st.floats(-10, 10, width=32))


class TestProjection:
    def test_top_two(self):
        np.testing.assert_array_equal(st_.project_sparse([3, -1, 2], 2), [3, 0, 2])

    def test_tie_prefers_smaller_index(self):
        np.testing.assert_array_equal(st_.project_sparse([2, -2, 1], 1), [2, 0, 0])

    def test_sparse_input_unchanged(self):
        z = np.array([0.0, 4.0, 0.0, -1.0])
        np.testing.assert_array_equal(st_.project_sparse(z, 2), z)
        np.testing.assert_array_equal(st_.project_sparse(z, 3), z)

    @pytest.mark.parametrize("s", [0, 4])
    def test_s_out_of_range(self, s):
        with pytest.raises(ValueError):
            st_.project_sparse([1.0, 2.0, 3.0], s)

    @given(vectors, st.data())
    def test_idempotent(self, z, data):
        s = data.draw(st.integers(1, z.size))
        once = st_.project_sparse(z, s)
        np.testing.assert_array_equal(st_.project_sparse(once, s), once)
        assert np.count_nonzero(once) <= s

    def test_optimal_against_random_sparse_points(self, rng):
        for _ in range(20):
            p = int(rng.integers(2, 15))
            s = int(rng.integers(1, p + 1))
            z = rng.standard_normal(p)
            best = np.linalg.norm(z - st_.project_sparse(z, s))
            W = np.zeros((1000, p))
            for row in W:
                idx = rng.choice(p, size=s, replace=False)
                row[idx] = rng.standard_normal(s) * 2
            assert np.all(np.linalg.norm(z - W, axis=1) >= best - 1e-12)


class TestSelectSupport:
    def test_clear_order(self):
        sel = st_.select_support(Iterate([0.5, -0.9, 0.2], np.zeros(3)), 1.0, 2)
        np.testing.assert_array_equal(sel.support, [0, 1])
        assert not sel.tie_at_boundary

    def test_tie_flag(self):
        sel = st_.select_support(Iterate([1.0, -1.0, 0.5], np.zeros(3)), 1.0, 1)
        np.testing.assert_array_equal(sel.support, [0])
        assert sel.tie_at_boundary

    def test_zero_gradient_keeps_support(self):
        z = np.array([0.0, 0.0, 3.0, 0.0, -1.0])
        sel = st_.select_support(Iterate(z, np.zeros(5)), 0.7, 3)
        assert {2, 4} <= set(sel.support.tolist())
        np.testing.assert_array_equal(sel.support, [0, 2, 4])

    def test_uses_tau(self):
        u = Iterate([1.0, 0.0], [0.0, 1.0])
        np.testing.assert_array_equal(st_.select_support(u, 0.5, 1).support, [0])
        np.testing.assert_array_equal(st_.select_support(u, 2.0, 1).support, [1])

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            st_.select_support(Iterate([1.0], [0.0]), 0.0, 1)

    @given(vectors, st.data())
    def test_agrees_with_projection(self, z, data):
        s = data.draw(st.integers(1, z.size))
        d = data.draw(arrays(np.float64, z.size, elements=st.floats(-10, 10, width=32)))
        tau = data.draw(st.floats(0.01, 5))
        sel = st_.select_support(Iterate(z, d), tau, s)
        proj = st_.project_sparse(z - tau * d, s)
        assert sel.support.size == s
        kept = np.zeros(z.size, dtype=bool)
        kept[sel.support] = True
        np.testing.assert_array_equal(proj[~kept], 0.0)
        np.testing.assert_array_equal(proj[kept], (z - tau * d)[kept])

    @given(vectors, st.data())
    def test_tie_flag_definition(self, z, data):
        s = data.draw(st.integers(1, z.size))
        sel = st_.select_support(Iterate(z, np.zeros_like(z)), 1.0, s)
        mags = np.sort(np.abs(z))[::-1]
        expected = s < z.size and mags[s - 1] == mags[s]
        assert sel.tie_at_boundary == expected


def naive_residual(ds, u, T):
    g = model.gradient(ds, u.z)
    Tc = [i for i in range(ds.p) if i not in set(T)]
    parts = [u.d[i] for i in T] + [u.z[i] for i in Tc]
    parts += [u.d[i] - g[i] for i in T] + [u.d[i] - g[i] for i in Tc]
    return np.array(parts)


def restricted_minimizer(ds, T):
    """Minimizer of the loss over vectors supported on T (dense Newton)."""
    z = np.zeros(ds.p)
    z[T] = dense_newton_minimizer(ds.X[:, T], ds.y)
    return z


class TestResidual:
    def test_at_origin(self, rng):
        ds = random_dataset(rng, 10, 6)
        g0 = model.gradient(ds, np.zeros(6))
        T = np.array([1, 4])
        F, norm = st_.residual(ds, Iterate(np.zeros(6), g0), T)
        assert norm == pytest.approx(np.linalg.norm(g0[T]), rel=1e-14)
        np.testing.assert_array_equal(F[6:], 0.0)

    def test_zero_at_strong_point(self, rng):
        ds = random_dataset(rng, 40, 5)
        T = np.array([0, 2, 3])
        z = restricted_minimizer(ds, T)
        g = model.gradient(ds, z)
        Tc = np.setdiff1d(np.arange(5), T)
        tau = 0.5 * np.abs(z[T]).min() / np.abs(g[Tc]).max()
        u = Iterate(z, g)
        sel = st_.select_support(u, tau, 3)
        np.testing.assert_array_equal(sel.support, T)
        _, norm = st_.residual(ds, u, sel.support)
        assert norm <= 1e-10
        assert st_.classify_stationary(ds, z, tau, 3) is Stationarity.STRONG

    def test_matches_naive_stacking(self, rng):
        for _ in range(10):
            ds = random_dataset(rng, 9, 7)
            u = Iterate(rng.standard_normal(7), rng.standard_normal(7))
            T = np.sort(rng.choice(7, size=3, replace=False))
            F, norm = st_.residual(ds, u, T)
            oracle = naive_residual(ds, u, T.tolist())
            np.testing.assert_allclose(F, oracle, atol=1e-14)
            assert norm == pytest.approx(np.linalg.norm(oracle), abs=1e-14)


class TestClassify:
    def test_sparse_global_minimizer_is_strong(self, rng):
        ds, z_star = sparse_minimizer_instance(rng)
        assert np.count_nonzero(z_star) == 2
        assert st_.classify_stationary(ds, z_star, 1.0, 3) is Stationarity.STRONG

    def test_worked_example(self, worked_example):
        ds, z = worked_example
        assert st_.classify_stationary(ds, z, 1.0, 2) is Stationarity.STRONG
        assert st_.classify_stationary(ds, z, 10.0, 2) is not Stationarity.STRONG
        # boundary: |d_3| = 1/6 equals [z]_2 / tau at tau = 6
        assert st_.classify_stationary(ds, z, 6.0, 2) is Stationarity.PLAIN
        assert st_.classify_stationary(ds, z, 5.9, 2) is Stationarity.STRONG

    def test_too_dense(self, worked_example):
        ds, _ = worked_example
        assert st_.classify_stationary(ds, np.ones(3), 1.0, 2) is Stationarity.NONE

    def test_nonzero_gradient_on_support(self, worked_example):
        ds, _ = worked_example
        assert st_.classify_stationary(ds, np.array([1.0, 0, 2.0]), 0.01, 2) is Stationarity.NONE

    @given(st.integers(0, 2**31), st.floats(0.05, 1.0))
    def test_strong_persists_for_smaller_tau(self, seed, shrink):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng, 40, 5)
        T = np.sort(rng.choice(5, size=2, replace=False))
        z = restricted_minimizer(ds, T)
        g = model.gradient(ds, z)
        tau = 0.9 * np.abs(z[T]).min() / np.abs(np.delete(g, T)).max()
        assume(st_.classify_stationary(ds, z, tau, 2) is Stationarity.STRONG)
        assert st_.classify_stationary(ds, z, tau * shrink, 2) is Stationarity.STRONG


class TestJacobian:
    def test_identity_design_blocks(self):
        ds = Dataset(np.eye(2), [0, 1])
        u = Iterate(np.zeros(2), model.gradient(ds, np.zeros(2)))
        J = st_.jacobian_dense(ds, u, [0])
        expected = np.array([
            [0, 0, 1, 0],
            [0, 1, 0, 0],
            [-1 / 8, 0, 1, 0],
            [0, -1 / 8, 0, 1],
        ])
        np.testing.assert_allclose(J, expected, atol=1e-16)

    def test_structural_blocks(self, rng):
        ds = random_dataset(rng, 12, 6)
        u = Iterate(rng.standard_normal(6), rng.standard_normal(6))
        T = np.array([1, 3, 5])
        J = st_.jacobian_dense(ds, u, T)
        s, p = 3, 6
        np.testing.assert_array_equal(J[:s, :p], 0)
        np.testing.assert_array_equal(J[:s, p:p + s], np.eye(s))
        np.testing.assert_array_equal(J[:s, p + s:], 0)
        np.testing.assert_array_equal(J[s:p, :s], 0)
        np.testing.assert_array_equal(J[s:p, s:p], np.eye(p - s))
        np.testing.assert_array_equal(J[s:p, p:], 0)
        np.testing.assert_array_equal(J[p:, p:], np.eye(p))
        H = model.hessian_block(ds, u.z, np.arange(p), np.arange(p))
        order = [1, 3, 5, 0, 2, 4]
        np.testing.assert_allclose(J[p:, :p], -H[np.ix_(order, order)])

    def test_finite_differences_of_residual(self, rng):
        ds = random_dataset(rng, 15, 6)
        u = Iterate(rng.standard_normal(6), rng.standard_normal(6))
        T = np.array([0, 4])
        Tc = np.setdiff1d(np.arange(6), T)
        order = np.concatenate([T, Tc])
        J = st_.jacobian_dense(ds, u, T)
        h = 1e-6
        for _ in range(5):
            v = rng.standard_normal(12)
            dz = np.zeros(6)
            dd = np.zeros(6)
            dz[order] = v[:6]
            dd[order] = v[6:]
            Fp, _ = st_.residual(ds, Iterate(u.z + h * dz, u.d + h * dd), T)
            Fm, _ = st_.residual(ds, Iterate(u.z - h * dz, u.d - h * dd), T)
            fd = (Fp - Fm) / (2 * h)
            assert np.linalg.norm(J @ v - fd) / np.linalg.norm(fd) <= 1e-5

    def test_cap(self, rng):
        ds = random_dataset(rng, 3, 70)
        u = Iterate(np.zeros(70), np.zeros(70))
        with pytest.raises(ValueError):
            st_.jacobian_dense(ds, u, [0])
        with pytest.raises(ValueError):
            st_.jacobian_inverse_formula(ds, u, [0])

    def test_inverse_identity_design(self):
        ds = Dataset(np.eye(2), [0, 1])
        u = Iterate(np.zeros(2), np.zeros(2))
        inv = st_.jacobian_inverse_formula(ds, u, [0])
        assert inv[0, 0] == pytest.approx(8.0)
        assert inv[0, 1] == 0.0
        assert inv[3, 1] == pytest.approx(1 / 8)  # R(z)
        np.testing.assert_allclose(st_.jacobian_dense(ds, u, [0]) @ inv, np.eye(4), atol=1e-15)

    def test_inverse_random(self, rng):
        ds = random_dataset(rng, 20, 8)
        u = Iterate(rng.standard_normal(8) * 0.5, rng.standard_normal(8))
        T = st_.select_support(u, 1.0, 3).support
        J = st_.jacobian_dense(ds, u, T)
        inv = st_.jacobian_inverse_formula(ds, u, T)
        np.testing.assert_allclose(inv, np.linalg.inv(J), atol=1e-8)
        assert np.max(np.abs(J @ inv - np.eye(16))) <= 1e-8

    def test_inverse_rank_deficient(self, rng):
        X = rng.standard_normal((10, 4))
        X[:, 2] = X[:, 1]
        ds = Dataset(X, (rng.random(10) < 0.5).astype(float))
        with pytest.raises(ConditionError):
            st_.jacobian_inverse_formula(ds, Iterate(np.zeros(4), np.zeros(4)), [1, 2])


class TestRestrictedEigenvalue:
    def test_identity(self):
        assert st_.restricted_min_eigenvalue(Dataset(np.eye(3), [0, 1, 0]), [0, 1]) == pytest.approx(1.0)

    def test_duplicate_columns(self, rng):
        X = rng.standard_normal((10, 4))
        X[:, 3] = X[:, 0]
        ds = Dataset(X, np.zeros(10))
        assert st_.restricted_min_eigenvalue(ds, [0, 3]) <= 1e-10

    def test_dense_oracle(self, rng):
        ds = random_dataset(rng, 10, 6)
        T = [0, 2, 5]
        XT = ds.X[:, T]
        oracle = np.linalg.eigvals(XT.T @ XT).real.min()
        assert st_.restricted_min_eigenvalue(ds, T) == pytest.approx(oracle, abs=1e-8)

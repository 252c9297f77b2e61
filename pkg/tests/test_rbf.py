import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formlearn import rbf
from formlearn.rbf import GridError


def small_grid(dim_q=2, per_dim=3, lo=-1.0, hi=1.0, width=0.5):
    return rbf.build_grid(dim_q, per_dim, [[lo, hi]] * dim_q, width)


class TestBuildGrid:
    def test_example_scale_grid(self):
        g = rbf.build_grid(6, 4, [[-100, 100]] * 6, 90.0)
        assert g.n_units == 4096
        np.testing.assert_allclose(g.axes[0], [-100.0, -100.0 / 3.0, 100.0 / 3.0, 100.0])

    def test_one_axis_endpoints(self):
        g = rbf.build_grid(1, 2, [[0.0, 1.0]], 1.0)
        np.testing.assert_array_equal(g.centers, [[0.0], [1.0]])

    def test_midpoint_forced_by_even_spacing(self):
        g = small_grid(dim_q=2, per_dim=3)
        assert any(np.array_equal(c, [0.0, 0.0]) for c in g.centers)

    def test_memory_cap(self):
        with pytest.raises(GridError):
            rbf.build_grid(6, 8, [[-1, 1]] * 6, 1.0, memory_cap=100_000)

    def test_bad_inputs(self):
        with pytest.raises(GridError):
            rbf.build_grid(2, 1, [[-1, 1]] * 2, 1.0)
        with pytest.raises(GridError):
            rbf.build_grid(2, 3, [[1, -1]] * 2, 1.0)
        with pytest.raises(GridError):
            rbf.build_grid(2, 3, [[-1, 1]] * 2, -2.0)


class TestRegressor:
    def test_unit_response_at_center(self):
        g = small_grid()
        s = rbf.regressor(g, g.centers[4])
        assert s[4] == 1.0
        assert np.all(s <= 1.0) and np.all(s > 0.0)

    def test_analytic_e_minus_one(self):
        g = rbf.build_grid(1, 2, [[0.0, 10.0]], width=4.0)
        s = rbf.regressor(g, [2.0])  # distance 2, d^2 = width
        np.testing.assert_allclose(s[0], np.exp(-1.0), rtol=1e-14)

    def test_example_width_value(self):
        # distance 3 with width 90: exp(-9/90)
        g = rbf.build_grid(1, 2, [[0.0, 100.0]], width=90.0)
        s = rbf.regressor(g, [3.0])
        np.testing.assert_allclose(s[0], 0.9048374180359595, rtol=1e-12)
        np.testing.assert_allclose(s[0], np.exp(-9.0 / 90.0), rtol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
    def test_norm_bound(self, x):
        g = small_grid()
        s = rbf.regressor(g, x)
        assert np.all(s > 0.0) and np.all(s <= 1.0)
        assert np.linalg.norm(s) <= np.sqrt(g.n_units) + 1e-12


class TestLocalizedRegressor:
    def test_large_radius_matches_full(self):
        g = small_grid()
        x = [0.3, -0.2]
        idx, vals = rbf.localized_regressor(g, x, d_loc=100.0)
        np.testing.assert_array_equal(idx, np.arange(g.n_units))
        np.testing.assert_allclose(vals, rbf.regressor(g, x), rtol=1e-15)

    def test_tiny_radius_at_center(self):
        g = small_grid()
        idx, vals = rbf.localized_regressor(g, g.centers[4], d_loc=0.5)
        np.testing.assert_array_equal(idx, [4])
        np.testing.assert_allclose(vals, [1.0])

    def test_tail_bound_analytic(self):
        # width 90, cutoff 45: each dropped response < exp(-22.5)
        assert np.exp(-45.0**2 / 90.0) == pytest.approx(1.69e-10, rel=0.01)

    def test_dropped_tail_inner_product_bound(self):
        g = rbf.build_grid(2, 5, [[-10, 10]] * 2, width=8.0)
        rng = np.random.default_rng(42)
        d_loc = 6.0
        for _ in range(100):
            x = rng.uniform(-12, 12, 2)
            w = rng.normal(0, 3.0, g.n_units)
            idx, vals = rbf.localized_regressor(g, x, d_loc)
            full = w @ rbf.regressor(g, x)
            sparse = w[idx] @ vals if idx.size else 0.0
            bound = rbf.tail_bound(g, d_loc, np.abs(w).max())
            assert abs(full - sparse) <= bound + 1e-15

    def test_requires_positive_radius(self):
        with pytest.raises(GridError):
            rbf.localized_regressor(small_grid(), [0, 0], 0.0)


class TestNnOutput:
    def test_zero_weights(self):
        g = small_grid()
        s = rbf.regressor(g, [0.1, 0.1])
        np.testing.assert_array_equal(rbf.nn_output(np.zeros((3, g.n_units)), s), np.zeros(3))

    def test_one_hot(self):
        g = small_grid()
        x = [0.37, -0.81]
        s = rbf.regressor(g, x)
        w = np.zeros((1, g.n_units))
        w[0, 7] = 1.0
        np.testing.assert_allclose(rbf.nn_output(w, s), [s[7]])

    def test_sparse_matches_dense(self):
        g = small_grid()
        rng = np.random.default_rng(1)
        w = rng.normal(size=(3, g.n_units))
        x = [0.2, 0.9]
        idx, vals = rbf.localized_regressor(g, x, d_loc=100.0)
        np.testing.assert_allclose(
            rbf.nn_output_sparse(w, idx, vals), rbf.nn_output(w, rbf.regressor(g, x)), rtol=1e-12
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rbf.nn_output(np.zeros((2, 5)), np.zeros(6))


class TestMeanWeights:
    def test_constant_history(self):
        t = np.linspace(0, 10, 11)
        hist = np.tile(np.array([1.0, -2.0]), (11, 1))
        np.testing.assert_array_equal(rbf.mean_weights(t, hist, 2.0, 8.0), [1.0, -2.0])

    def test_linear_ramp_half(self):
        t = np.linspace(0, 1, 2001)
        hist = np.outer(t, np.array([3.0]))
        np.testing.assert_allclose(rbf.mean_weights(t, hist, 0.0, 1.0), [1.5], atol=1e-3)

    def test_single_sample(self):
        t = np.array([0.0, 1.0, 2.0])
        hist = np.array([[0.0], [5.0], [9.0]])
        np.testing.assert_array_equal(rbf.mean_weights(t, hist, 0.9, 1.1), [5.0])

    def test_empty_window_raises(self):
        with pytest.raises(ValueError):
            rbf.mean_weights(np.array([0.0, 1.0]), np.zeros((2, 1)), 0.4, 0.6)
        with pytest.raises(ValueError):
            rbf.mean_weights(np.array([0.0, 1.0]), np.zeros((2, 1)), 0.8, 0.2)

    def test_linear_and_resampling_invariant(self):
        t1 = np.linspace(0, 1, 11)
        t2 = np.linspace(0, 1, 101)
        const = lambda t: np.tile([2.0, 7.0], (len(t), 1))
        np.testing.assert_allclose(
            rbf.mean_weights(t1, const(t1), 0, 1), rbf.mean_weights(t2, const(t2), 0, 1)
        )
        a = rbf.mean_weights(t1, const(t1) * 2.0, 0, 1)
        np.testing.assert_allclose(a, 2.0 * rbf.mean_weights(t1, const(t1), 0, 1))


class TestPartitionZeta:
    def test_single_sample_at_center(self):
        g = small_grid()  # spacing 1.0
        zeta, zbar = rbf.partition_zeta(g, [g.centers[4]], d_loc=0.5)
        np.testing.assert_array_equal(zeta, [4])
        assert len(zbar) == g.n_units - 1

    def test_huge_radius_empties_far_set(self):
        g = small_grid()
        zeta, zbar = rbf.partition_zeta(g, [[0.0, 0.0]], d_loc=10.0)
        assert len(zbar) == 0
        assert len(zeta) == g.n_units

    def test_far_set_is_actually_far(self):
        g = small_grid(per_dim=4)
        rng = np.random.default_rng(3)
        samples = rng.uniform(-1, 1, (20, 2))
        d_loc = 0.4
        zeta, zbar = rbf.partition_zeta(g, samples, d_loc)
        assert set(zeta) | set(zbar) == set(range(g.n_units))
        assert not set(zeta) & set(zbar)
        for j in zbar:
            dmin = np.min(np.linalg.norm(samples - g.centers[j], axis=1))
            assert dmin > d_loc
        for j in zeta:
            dmin = np.min(np.linalg.norm(samples - g.centers[j], axis=1))
            assert dmin <= d_loc

    def test_requires_samples(self):
        with pytest.raises(ValueError):
            rbf.partition_zeta(small_grid(), np.zeros((0, 2)), 1.0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracvisco import fracops as fo
from fracvisco.errors import DomainError, PreconditionError, ShapeError

from .conftest import bump_series, make_series

# High-precision references (mpmath, 30 digits).
GAMMA_REF = {
    0.1: 9.5135076986687318363,
    0.5: 1.7724538509055160273,
    2.5: 1.3293403881791370205,
    7.3: 1271.4236336639092731,
    29.5: 1.6348125198274266444e30,
}
I_HALF_COS_AT_1 = 0.84605678672415290999  # I^0.5 cos (1), also D^0.5 sin (1)
I_03_COS_AT_07 = 0.84268433118919370606  # I^0.3 cos (0.7)
I_RIGHT_HALF_T2_AT_025 = 0.29316150714175195252  # right I^0.5 t^2 on (0,1) at 0.25
CAPUTO_03_COS_AT_08 = -0.41529795277180282893


class TestGamma:
    @pytest.mark.parametrize("x, ref", sorted(GAMMA_REF.items()))
    def test_reference_values(self, x, ref):
        assert fo.gamma_fn(x) == pytest.approx(ref, rel=1e-13)

    def test_trivial_values(self):
        assert fo.gamma_fn(1) == 1.0
        assert fo.gamma_fn(3) == 2.0

    @given(st.floats(min_value=1e-3, max_value=30.0))
    def test_matches_math_gamma(self, x):
        assert fo.gamma_fn(x) == pytest.approx(math.gamma(x), rel=1e-13)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5, float("nan")])
    def test_nonpositive_rejected(self, x):
        with pytest.raises(DomainError):
            fo.gamma_fn(x)

    def test_fault_injection_is_scoped(self):
        with fo.inject_gamma_fault(1.01):
            assert fo.gamma_fn(1.0) == pytest.approx(1.01)
        assert fo.gamma_fn(1.0) == 1.0


class TestGridAndSeries:
    def test_grid_nodes(self):
        g = fo.TimeGrid(0.5, 1.5, 4)
        assert g.dt == 0.25
        np.testing.assert_allclose(g.nodes, [0.5, 0.75, 1.0, 1.25, 1.5])
        assert g.n_nodes == 5

    @pytest.mark.parametrize("args", [(1.0, 0.0, 4), (0.0, 1.0, 0), (0.0, 0.0, 3)])
    def test_invalid_grid(self, args):
        with pytest.raises(DomainError):
            fo.TimeGrid(*args)

    def test_series_length_and_finiteness(self):
        g = fo.TimeGrid(0.0, 1.0, 4)
        with pytest.raises(ShapeError):
            fo.TimeSeries(g, np.zeros(4))
        with pytest.raises(DomainError):
            fo.TimeSeries(g, [0, 1, np.nan, 0, 0])

    def test_series_is_read_only(self):
        u = fo.TimeSeries.constant(fo.TimeGrid(0, 1, 4), 2.0)
        with pytest.raises(ValueError):
            u.values[0] = 1.0


class TestIntegrals:
    def test_constant_closed_form(self):
        u = make_series(np.ones_like, 64)
        out = fo.rl_integral_left(u, 0.5).values
        assert out[-1] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-14)
        np.testing.assert_allclose(out, u.grid.nodes**0.5 / math.gamma(1.5), rtol=1e-13, atol=1e-15)

    def test_linear_is_exact(self):
        u = make_series(lambda t: t, 32)
        np.testing.assert_allclose(fo.rl_integral_left(u, 1.0).values, u.grid.nodes**2 / 2, atol=1e-15)
        np.testing.assert_allclose(
            fo.rl_integral_left(u, 0.7).values, u.grid.nodes**1.7 / math.gamma(2.7), atol=1e-14
        )

    def test_order_zero_is_identity(self, rng):
        u = fo.TimeSeries(fo.TimeGrid(0, 1, 20), rng.standard_normal(21))
        for op in (fo.rl_integral_left, fo.rl_integral_right):
            np.testing.assert_array_equal(op(u, 0.0).values, u.values)

    def test_quadrature_oracle_cos(self):
        u = make_series(np.cos, 2048)
        assert fo.rl_integral_left(u, 0.5).values[-1] == pytest.approx(I_HALF_COS_AT_1, abs=1e-6)
        u = make_series(np.cos, 2800, t_end=1.4)
        v = fo.rl_integral_left(u, 0.3).values
        assert v[1400] == pytest.approx(I_03_COS_AT_07, abs=1e-6)

    def test_right_constant_and_oracle(self):
        one = make_series(np.ones_like, 64)
        assert fo.rl_integral_right(one, 0.5).values[0] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-14)
        u = make_series(lambda t: t**2, 2048)
        assert fo.rl_integral_right(u, 0.5).values[512] == pytest.approx(I_RIGHT_HALF_T2_AT_025, abs=1e-6)

    def test_time_reversal(self, rng):
        u = fo.TimeSeries(fo.TimeGrid(0, 2, 30), rng.standard_normal(31))
        right = fo.rl_integral_right(u, 0.4).values
        mirrored = fo.rl_integral_left(u.reversed(), 0.4).reversed().values
        np.testing.assert_allclose(right, mirrored, atol=1e-15)

    def test_negative_order(self):
        with pytest.raises(DomainError):
            fo.rl_integral_left(make_series(np.ones_like, 4), -0.1)


class TestDerivatives:
    @pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
    def test_constant_rule_exact(self, alpha):
        u = make_series(np.ones_like, 128)
        d = fo.rl_derivative_left(u, alpha, 1.0).values
        t = u.grid.nodes
        np.testing.assert_array_equal(d[1:], 1.0 / (fo.gamma_fn(1 - alpha) * t[1:] ** alpha))
        assert np.isinf(d[0])
        np.testing.assert_array_equal(fo.caputo_derivative_left(u, alpha, 1.0).values, 0.0)

    def test_linear(self):
        u = make_series(lambda t: t, 64)
        for op in (fo.rl_derivative_left, fo.caputo_derivative_left):
            d = op(u, 0.5, 0.0).values
            assert d[-1] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-13)
            assert d[0] == 0.0

    def test_quadrature_oracles(self):
        u = make_series(np.sin, 4096)
        assert fo.rl_derivative_left(u, 0.5, 0.0).values[-1] == pytest.approx(I_HALF_COS_AT_1, abs=1e-4)
        u = make_series(np.cos, 4000, t_end=1.0)
        assert fo.caputo_derivative_left(u, 0.3, 1.0).values[3200] == pytest.approx(CAPUTO_03_COS_AT_08, abs=1e-4)

    def test_order_zero_identity(self, rng):
        u = fo.TimeSeries(fo.TimeGrid(0, 1, 10), rng.standard_normal(11))
        for op in (fo.rl_derivative_left, fo.caputo_derivative_left, fo.rl_derivative_right, fo.caputo_derivative_right):
            np.testing.assert_array_equal(op(u, 0.0).values, u.values)

    @pytest.mark.parametrize("alpha", [1.0, 1.5, -0.1])
    def test_order_out_of_range(self, alpha):
        with pytest.raises(DomainError):
            fo.rl_derivative_left(make_series(np.ones_like, 4), alpha, 1.0)

    def test_caputo_is_rl_of_shifted(self, rng):
        values = rng.standard_normal(41)
        u = fo.TimeSeries(fo.TimeGrid(0, 1, 40), values)
        caputo = fo.caputo_derivative_left(u, 0.4).values
        shifted = fo.TimeSeries(u.grid, values - values[0])
        np.testing.assert_allclose(caputo, fo.rl_derivative_left(shifted, 0.4, 0.0).values, atol=1e-12)


class TestStructure:
    @given(st.integers(min_value=2, max_value=40), st.floats(0.05, 0.95), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_causality(self, n, alpha, seed):
        rng = np.random.default_rng(seed)
        u = rng.standard_normal(n + 1)
        j = int(rng.integers(0, n))
        v = u.copy()
        v[j + 1 :] += rng.standard_normal(n - j)
        for fn in (
            lambda x: fo.frac_integral(x, 0.1, alpha),
            lambda x: fo.caputo_derivative(x, 0.1, alpha),
            lambda x: fo.rl_derivative(x, 0.1, alpha, "left", 0.0),
        ):
            np.testing.assert_array_equal(fn(u)[: j + 1], fn(v)[: j + 1])
        # Right operators are anticausal.
        w = u.copy()
        w[:j] += 1.0
        np.testing.assert_array_equal(
            fo.frac_integral(u, 0.1, alpha, "right")[j:], fo.frac_integral(w, 0.1, alpha, "right")[j:]
        )

    @given(st.floats(0.05, 0.95), st.floats(-3, 3), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_linearity(self, alpha, scale, seed):
        rng = np.random.default_rng(seed)
        u, v = rng.standard_normal((2, 33))
        for fn in (lambda x: fo.frac_integral(x, 0.05, alpha), lambda x: fo.caputo_derivative(x, 0.05, alpha)):
            np.testing.assert_allclose(fn(u + scale * v), fn(u) + scale * fn(v), atol=1e-12)

    def test_array_operators_act_on_last_axis(self, rng):
        block = rng.standard_normal((3, 17))
        out = fo.frac_integral(block, 0.1, 0.6)
        for row_in, row_out in zip(block, out):
            np.testing.assert_array_equal(fo.frac_integral(row_in, 0.1, 0.6), row_out)

    @pytest.mark.parametrize("kind, order", [("integral", 0.7), ("derivative", 0.3)])
    @pytest.mark.parametrize("side", ["left", "right"])
    def test_kernel_matches_apply(self, rng, kind, order, side, tmp_path):
        grid = fo.TimeGrid(0, 1, 12)
        k = fo.ConvolutionKernel(order, side, kind, grid)
        u = rng.standard_normal(13)
        if kind == "derivative":
            u[0 if side == "left" else -1] = 0.0
        np.testing.assert_allclose(k.weights @ u, k.apply(u), atol=1e-13)
        w = k.weights
        assert np.all(np.triu(w, 1) == 0) if side == "left" else np.all(np.tril(w, -1) == 0)
        path = k.to_csv(tmp_path / "k.csv")
        from fracvisco.csvio import read_csv

        _, data = read_csv(path)
        np.testing.assert_array_equal(data, w)

    def test_kernel_reproduces_power(self):
        grid = fo.TimeGrid(0, 1, 50)
        k = fo.ConvolutionKernel(0.35, "left", "integral", grid)
        np.testing.assert_allclose(k.weights @ np.ones(51), grid.nodes**0.35 / math.gamma(1.35), atol=1e-14)


class TestIdentities:
    def test_semigroup_order_zero_exact(self, rng):
        u = fo.TimeSeries(fo.TimeGrid(0, 1, 30), rng.standard_normal(31))
        assert fo.semigroup_check(u, 0.0, 0.4) == 0.0

    def test_semigroup_constant_first_order(self):
        # For u(a) != 0 the product rule error is O(dt^(beta+gamma)); with beta+gamma = 1 it halves.
        r = [fo.semigroup_check(make_series(np.ones_like, n), 0.5, 0.5) for n in (256, 512, 1024)]
        assert r[0] / r[1] == pytest.approx(2.0, rel=1e-6)
        assert r[1] / r[2] == pytest.approx(2.0, rel=1e-6)

    def test_semigroup_rate_tracks_order_sum_for_nonvanishing_u(self):
        r = [fo.semigroup_check(make_series(np.cos, n), 0.3, 0.4) for n in (512, 1024)]
        assert r[0] / r[1] == pytest.approx(2**0.7, rel=0.01)

    def test_semigroup_second_order_for_vanishing_u(self):
        r = [fo.semigroup_check(make_series(lambda t: t**2 + t**3, n), 0.3, 0.4) for n in (256, 512)]
        assert r[0] / r[1] > 3.8

    def test_inverse_and_split_converge(self):
        for fn in (fo.inverse_residual, fo.split_derivative_residual):
            r = [fn(make_series(lambda t: t**2, n), 0.5) for n in (256, 512)]
            assert r[1] < 1e-4 and r[0] / r[1] > 2.5

    def test_inverse_requires_vanishing_start(self):
        with pytest.raises(PreconditionError):
            fo.inverse_residual(make_series(np.cos, 16), 0.5)

    def test_ibp_derivative_requires_vanishing_ends(self):
        with pytest.raises(PreconditionError):
            fo.ibp_derivative_residual(make_series(np.sin, 16), bump_series(16), 0.5)

    def test_ibp_derivative_transpose_structure(self):
        u, v = bump_series(512), bump_series(512, 0.4, 0.2)
        assert fo.ibp_derivative_residual(u, v, 0.5) < 1e-13

    def test_ibp_integral_converges(self):
        r = [
            fo.ibp_integral_residual(make_series(np.ones_like, n), make_series(np.cos, n), 0.5)
            for n in (256, 512)
        ]
        assert r[0] / r[1] > 2.0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanforecast import tensor as T
from kanforecast.errors import DimensionError
from kanforecast.gradcheck import max_gradient_error
from kanforecast.nn import silu
from kanforecast.spline import (
    KanLayer,
    KanNetwork,
    SplineGrid,
    bspline_basis,
    bspline_basis_derivative,
    kan_forward,
    kan_layer_forward,
)
from kanforecast.tensor import Tensor


def cardinal_cubic(u):
    """Closed-form uniform cubic B-spline on knots 0,1,2,3,4 (written out piece by piece)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    p0 = (u >= 0) & (u < 1)
    p1 = (u >= 1) & (u < 2)
    p2 = (u >= 2) & (u < 3)
    p3 = (u >= 3) & (u < 4)
    out[p0] = u[p0] ** 3 / 6
    out[p1] = (-3 * u[p1] ** 3 + 12 * u[p1] ** 2 - 12 * u[p1] + 4) / 6
    out[p2] = (3 * u[p2] ** 3 - 24 * u[p2] ** 2 + 60 * u[p2] - 44) / 6
    out[p3] = (4 - u[p3]) ** 3 / 6
    return out


def oracle_basis(grid, x):
    t = grid.knots
    return np.array([cardinal_cubic((x - t[i]) / grid.spacing) for i in range(grid.n_basis)])


class TestGrid:
    def test_knots(self):
        g = SplineGrid()
        assert len(g.knots) == g.intervals + 2 * g.degree + 1 == 12
        assert g.n_basis == 8
        np.testing.assert_allclose(np.diff(g.knots), 0.2, rtol=1e-12)
        np.testing.assert_allclose(g.knots[3], 0.0, atol=1e-15)
        np.testing.assert_allclose(g.knots[8], 1.0, atol=1e-15)


class TestBasis:
    def test_degree_zero_indicators(self):
        g = SplineGrid(intervals=5, degree=0)
        for x in np.random.default_rng(0).uniform(0, 1, 50):
            b = bspline_basis(g, x)
            assert b.sum() == 1.0 and np.count_nonzero(b) == 1

    def test_partition_at_037(self):
        assert abs(bspline_basis(SplineGrid(), 0.37).sum() - 1.0) < 1e-12

    def test_cardinal_values_at_knot(self):
        g = SplineGrid()
        b = bspline_basis(g, g.knots[5])  # interior knot x = 0.4
        nz = b[np.abs(b) > 1e-14]
        np.testing.assert_allclose(nz, [1 / 6, 2 / 3, 1 / 6], rtol=0, atol=1e-12)

    def test_matches_closed_form(self):
        g = SplineGrid()
        xs = np.random.default_rng(1).uniform(0, 1, 200)
        got = bspline_basis(g, xs)
        want = np.stack([oracle_basis(g, x) for x in xs])
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_partition_of_unity_1000(self):
        xs = np.random.default_rng(2).uniform(0, 1, 1000)
        np.testing.assert_allclose(bspline_basis(SplineGrid(), xs).sum(axis=-1), 1.0, atol=1e-10)

    def test_domain_end_is_included(self):
        assert abs(bspline_basis(SplineGrid(), 1.0).sum() - 1.0) < 1e-12

    def test_local_support(self):
        g = SplineGrid()
        xs = np.linspace(g.knots[0], g.knots[-1], 5001)
        oracle = np.stack([oracle_basis(g, x) for x in xs])
        inside = (xs >= 0) & (xs <= 1)
        ours = bspline_basis(g, xs[inside])
        for i in range(g.n_basis):
            for support in (xs[oracle[:, i] > 0], xs[inside][ours[:, i] > 0]):
                assert support.max() - support.min() <= (g.degree + 1) * g.spacing + 1e-12
        assert np.all(np.count_nonzero(ours, axis=1) <= g.degree + 1)

    def test_out_of_domain_is_clamped(self):
        g = SplineGrid()
        np.testing.assert_array_equal(bspline_basis(g, -3.0), bspline_basis(g, 0.0))
        np.testing.assert_array_equal(bspline_basis(g, 7.0), bspline_basis(g, 1.0))

    def test_derivative_matches_differences(self):
        g = SplineGrid()
        xs = np.random.default_rng(3).uniform(0.01, 0.99, 100)
        h = 1e-6
        fd = (bspline_basis(g, xs + h) - bspline_basis(g, xs - h)) / (2 * h)
        np.testing.assert_allclose(bspline_basis_derivative(g, xs), fd, atol=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1), st.integers(1, 12), st.integers(0, 4))
    def test_partition_property(self, x, intervals, degree):
        b = bspline_basis(SplineGrid(intervals, degree), x)
        assert b.shape == (intervals + degree,)
        assert abs(b.sum() - 1.0) < 1e-10
        assert np.all(b >= -1e-15)


def _layer(n_in, n_out, seed=0, **kw):
    return KanLayer(n_in, n_out, np.random.default_rng(seed), **kw)


class TestKanLayer:
    def test_zero_params_zero_output(self):
        layer = _layer(3, 2)
        layer.coef.data[:] = 0
        layer.base_weight.data[:] = 0
        x = Tensor(np.random.default_rng(0).uniform(-1, 2, size=(5, 3)))
        np.testing.assert_array_equal(layer(x).data, 0.0)

    def test_base_path_only(self):
        layer = _layer(1, 1)
        layer.spline_weight.data[:] = 0
        layer.base_weight.data[:] = 1
        xs = np.linspace(0, 1, 11)[:, None]
        np.testing.assert_allclose(layer(Tensor(xs)).data, silu(Tensor(xs)).data, atol=1e-15)

    def test_unit_coefficients_give_partition_of_unity(self):
        layer = _layer(1, 1)
        layer.base_weight.data[:] = 0
        layer.spline_weight.data[:] = 1
        layer.coef.data[:] = 1
        xs = np.random.default_rng(4).uniform(0, 1, (50, 1))
        np.testing.assert_allclose(layer(Tensor(xs)).data, 1.0, atol=1e-12)

    def test_edge_sum_matches_loop(self):
        layer = _layer(3, 2, seed=9)
        x = np.random.default_rng(5).uniform(0, 1, (4, 3))
        out = layer(Tensor(x)).data
        C, Wb, Ws = layer.coefficients, layer.base_weight.data, layer.spline_weight.data
        for b in range(4):
            for q in range(2):
                want = sum(
                    Wb[q, p] * x[b, p] / (1 + np.exp(-x[b, p]))
                    + Ws[q, p] * C[q, p] @ oracle_basis(layer.grid, x[b, p])
                    for p in range(3)
                )
                assert out[b, q] == pytest.approx(want, abs=1e-12)

    def test_each_edge_owns_n_coefficients(self):
        layer = _layer(4, 3)
        assert layer.coefficients.shape == (3, 4, layer.grid.n_basis)

    def test_width_mismatch(self):
        with pytest.raises(DimensionError):
            _layer(3, 2)(Tensor(np.zeros((2, 4))))

    def test_gradients(self):
        layer = _layer(3, 2, seed=11)
        layer.spline_weight.data = np.random.default_rng(6).normal(size=(2, 3))
        x = Tensor(np.random.default_rng(7).uniform(-2, 2, size=(5, 3)), requires_grad=True)
        w = Tensor(np.random.default_rng(8).normal(size=(5, 2)))
        f = lambda: (kan_layer_forward(layer, x) * w).sum()  # noqa: E731
        assert max_gradient_error(f, [x, layer.coef, layer.base_weight, layer.spline_weight]) < 1e-4

    @pytest.mark.parametrize("k", range(0, 6))
    def test_continuity_at_knots(self, k):
        layer = _layer(1, 1, seed=12)
        knot = SplineGrid().knots[3 + k]
        d = 1e-6

        def phi(v):
            return float(layer(Tensor([[v]])).data[0, 0])

        slope = abs(phi(knot + 1e-4) - phi(knot - 1e-4)) / 2e-4
        tol = 1e-4 * slope + 1e-12
        if k < 5:
            assert abs(phi(knot + d) - phi(knot)) <= tol
        assert abs(phi(knot) - phi(knot - d)) <= tol


class TestKanNetwork:
    def test_zero_single_layer(self):
        net = KanNetwork([140, 1], np.random.default_rng(0))
        for p in net.parameters():
            p.data[:] = 0
        x = Tensor(np.random.default_rng(1).uniform(0, 1, (3, 140)))
        np.testing.assert_array_equal(kan_forward(net, x).data, 0.0)

    def test_seeded_identical(self):
        x = Tensor(np.random.default_rng(1).uniform(0, 1, (3, 140)))
        a = kan_forward(KanNetwork([140, 8, 1], np.random.default_rng(5)), x).data
        b = kan_forward(KanNetwork([140, 8, 1], np.random.default_rng(5)), x).data
        assert a.tobytes() == b.tobytes()

    def test_widths_chain(self):
        net = KanNetwork([6, 4, 1], np.random.default_rng(0))
        assert [(l.in_dim, l.out_dim) for l in net.layers] == [(6, 4), (4, 1)]
        assert net(Tensor(np.zeros((2, 6)))).shape == (2, 1)
        with pytest.raises(DimensionError):
            net(Tensor(np.zeros((2, 5))))

    def test_network_gradient(self):
        net = KanNetwork([3, 2, 1], np.random.default_rng(2))
        x = Tensor(np.random.default_rng(3).uniform(0, 1, (4, 3)))
        f = lambda: T.tensor_sum(net(x))  # noqa: E731
        assert max_gradient_error(f, net.parameters()) < 1e-4

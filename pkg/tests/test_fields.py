"""Field calculus checked against closed-form functions."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from primeq.domain import BCVariant
from primeq.fields import (SurfaceField, VelocityField, d_x, d_y, d_z, div_h, fluctuation, grad_h, grad_norm2,
                           inner, l2_norm, laplacian, vertical_average, vertical_velocity, vertical_velocity_at)
from primeq.random_fields import power_decay, random_field

from conftest import ALL_BCS, dom

TWO_PI = 2 * np.pi


def profile(bc, h):
    """One admissible vertical profile per variant with its derivative, mean and antiderivative."""
    k = {BCVariant.NEUMANN: 1.0, BCVariant.DIRICHLET: 1.0, BCVariant.UPPER: 0.5, BCVariant.BOTTOM: 0.5}[bc]
    a = k * np.pi / h
    if bc in (BCVariant.NEUMANN, BCVariant.UPPER):
        f = lambda z: np.cos(a * (z + h))
        df = lambda z: -a * np.sin(a * (z + h))
        anti = lambda z: np.sin(a * (z + h)) / a
    else:
        f = lambda z: np.sin(a * (z + h))
        df = lambda z: a * np.cos(a * (z + h))
        anti = lambda z: (1 - np.cos(a * (z + h))) / a
    return f, df, anti, a


class TestDerivatives:
    @pytest.mark.parametrize("bc", ALL_BCS, ids=lambda b: b.value)
    def test_against_closed_form(self, bc):
        h = 1.3
        d = dom(bc, n=8, h=h)
        f, df, _, a = profile(bc, h)
        v = VelocityField.from_function(
            d, lambda x, y, z: (np.sin(TWO_PI * x) * np.cos(TWO_PI * 2 * y) * f(z), np.cos(TWO_PI * y) * f(z)))
        z, y, x = d.mesh
        np.testing.assert_allclose(d_x(v).grid[0], TWO_PI * np.cos(TWO_PI * x) * np.cos(4 * np.pi * y) * f(z),
                                   atol=1e-11)
        np.testing.assert_allclose(d_y(v).grid[1], -TWO_PI * np.sin(TWO_PI * y) * f(z), atol=1e-11)
        np.testing.assert_allclose(d_z(v).grid[1], np.cos(TWO_PI * y) * df(z), atol=1e-11)
        lap = -(TWO_PI**2 + a**2) * np.cos(TWO_PI * y) * f(z)
        np.testing.assert_allclose(laplacian(v).grid[1], lap, atol=1e-9)
        div = TWO_PI * np.cos(TWO_PI * x) * np.cos(4 * np.pi * y) * f(z) - TWO_PI * np.sin(TWO_PI * y) * f(z)
        np.testing.assert_allclose(div_h(v).values, div, atol=1e-11)

    def test_dz_twice_returns_primal(self):
        d = dom(BCVariant.UPPER)
        v = random_field(d, 1, power_decay(1.0))
        w = d_z(d_z(v))
        assert w.family == "primal"
        np.testing.assert_allclose(w.coef, -d.basis.eigenvalues[:, None, None] * v.coef, atol=1e-12)

    def test_grad_h_of_surface_field(self):
        d = dom(n=8)
        z, y, x = d.mesh
        s = SurfaceField.from_grid(d, np.sin(TWO_PI * x[0]) * np.cos(TWO_PI * y[0]))
        g = grad_h(s).grid
        np.testing.assert_allclose(g[0], TWO_PI * np.cos(TWO_PI * x[0]) * np.cos(TWO_PI * y[0]), atol=1e-12)
        np.testing.assert_allclose(g[1], -TWO_PI * np.sin(TWO_PI * x[0]) * np.sin(TWO_PI * y[0]), atol=1e-12)


class TestVerticalStructure:
    @pytest.mark.parametrize("bc", ALL_BCS, ids=lambda b: b.value)
    def test_vertical_average_matches_closed_form(self, bc):
        h = 0.8
        d = dom(bc, h=h)
        f, _, anti, _ = profile(bc, h)
        v = VelocityField.from_function(d, lambda x, y, z: (np.cos(TWO_PI * y) * f(z), 0 * x))
        mean = anti(0.0) / h
        np.testing.assert_allclose(vertical_average(v).grid[0], mean * np.cos(TWO_PI * d.y)[:, None] * np.ones(8),
                                   atol=1e-12)

    def test_fluctuation_has_zero_mean(self, bc):
        d = dom(bc)
        v = random_field(d, 3, power_decay(1.0), solenoidal=False)
        vt = fluctuation(v)
        np.testing.assert_allclose(vertical_average(vt).coef, 0.0, atol=1e-14)
        np.testing.assert_allclose((vt + VelocityField(d, 0 * v.coef, vertical_average(v).coef)).grid, v.grid,
                                   atol=1e-12)

    @pytest.mark.parametrize("bc", ALL_BCS, ids=lambda b: b.value)
    def test_vertical_velocity_closed_form(self, bc):
        h = 1.0
        d = dom(bc, h=h)
        f, _, anti, _ = profile(bc, h)
        v = VelocityField.from_function(d, lambda x, y, z: (np.sin(TWO_PI * x) * f(z), 0 * y))
        z = np.array([-1.0, -0.37, 0.0])
        x = d.x[None, None, :]
        w_exact = -TWO_PI * np.cos(TWO_PI * x) * anti(z)[:, None, None]
        np.testing.assert_allclose(vertical_velocity_at(v, z), np.broadcast_to(w_exact, (3, 8, 8)), atol=1e-12)

    def test_w_vanishes_at_bottom_and_at_top_when_solenoidal(self, bc):
        from primeq.hydrostatic import project

        d = dom(bc)
        v = project(random_field(d, 5, power_decay(1.0), solenoidal=False))
        ends = vertical_velocity_at(v, [-d.h, 0.0])
        assert np.abs(ends[0]).max() == 0.0
        assert np.abs(ends[1]).max() < 1e-12

    def test_vertical_velocity_on_nodes(self):
        d = dom(BCVariant.DIRICHLET)
        v = random_field(d, 2, power_decay(1.0))
        np.testing.assert_allclose(vertical_velocity(v).values, vertical_velocity_at(v, d.z), atol=1e-14)

    def test_barotropic_flag(self):
        d = dom()
        v = VelocityField.from_function(d, lambda x, y, z: (np.sin(TWO_PI * y) + 0 * z, 0 * x))
        assert v.is_barotropic
        assert not random_field(d, 1).is_barotropic


class TestInnerProducts:
    @given(seed=st.integers(0, 1000), bci=st.integers(0, 3))
    def test_parseval_against_grid_quadrature(self, seed, bci):
        d = dom(ALL_BCS[bci], n=8)
        u = random_field(d, seed, power_decay(1.0), solenoidal=False)
        v = random_field(d, seed + 1, power_decay(1.0), solenoidal=False)
        # collocation rule is exact for products of retained band-limited modes
        quad = np.sum(u.grid * v.grid * d.z_weights[None, :, None, None]) / (8 * 8)
        assert inner(u, v) == pytest.approx(quad, rel=1e-10, abs=1e-14)

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
    def test_bilinear_symmetric(self, a, b, seed):
        d = dom(BCVariant.BOTTOM)
        u, v, w = (random_field(d, seed + i, power_decay(1.0)) for i in range(3))
        assert inner(a * u + b * v, w) == pytest.approx(a * inner(u, w) + b * inner(v, w), abs=1e-10)
        assert inner(u, v) == pytest.approx(inner(v, u), abs=1e-14)

    def test_const_part_inner_product(self):
        d = dom(BCVariant.DIRICHLET)
        rng = np.random.default_rng(0)
        u = random_field(d, 1, power_decay(1.0), solenoidal=False)
        c = np.where(d.horizontal_dealias, rng.standard_normal((2, 8, 8)), 0.0)
        c = d.to_spectral_2d(d.from_spectral_2d(c))
        v = VelocityField(d, np.zeros_like(u.coef), c)
        quad_exact = np.sum(v.at(d.quad_nodes[0]) * u.at(d.quad_nodes[0]) * d.quad_nodes[1][None, :, None, None]) / 64
        assert inner(u, v) == pytest.approx(quad_exact, rel=1e-10)
        assert inner(v, v) == pytest.approx(d.h * np.sum(np.abs(c) ** 2), rel=1e-12)

    def test_grad_norm(self, bc):
        d = dom(bc)
        v = random_field(d, 9, power_decay(1.0))
        expected = l2_norm(d_x(v)) ** 2 + l2_norm(d_y(v)) ** 2 + float(
            np.sum(np.abs(d_z(v).coef) ** 2 * d.basis.dual_norms2[:, None, None]))
        assert grad_norm2(v) == pytest.approx(expected, rel=1e-12)


class TestConstruction:
    def test_shape_validation(self):
        d = dom()
        with pytest.raises(ValueError):
            VelocityField(d, np.zeros((2, 4, 8, 8)))
        with pytest.raises(ValueError):
            VelocityField.from_grid(d, np.zeros((8, 8, 8)))

    def test_non_finite_rejected(self):
        d = dom()
        c = np.zeros((2,) + d.shape, complex)
        c[0, 1, 1, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            VelocityField(d, c)

    def test_mixed_families_rejected(self):
        v = random_field(dom(), 0)
        with pytest.raises(ValueError):
            v + d_z(v)

    def test_neumann_const_folds_into_mode_zero(self):
        d = dom()
        c = np.zeros((2, 8, 8), complex)
        c[0, 1, 0] = 1.0
        v = VelocityField(d, np.zeros((2,) + d.shape), c)
        assert v.const is None and v.coef[0, 0, 1, 0] == 1.0

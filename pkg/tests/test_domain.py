"""Domain geometry, vertical bases and transforms."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from primeq.domain import BasisKind, BCVariant, DomainSpec, VerticalBasis, make_domain

from conftest import ALL_BCS, dom


class TestDomainSpec:
    @pytest.mark.parametrize("kw", [dict(nx=7), dict(ny=2), dict(nz=3), dict(h=0.0), dict(h=-1.0)])
    def test_rejects_bad_geometry(self, kw):
        with pytest.raises(ValueError):
            DomainSpec(**kw)

    @pytest.mark.parametrize("alias,expected", [
        ("empty", BCVariant.NEUMANN), ("Top", BCVariant.UPPER), ("dirichlet-bottom", BCVariant.BOTTOM),
        ("both", BCVariant.DIRICHLET),
    ])
    def test_bc_aliases(self, alias, expected):
        assert DomainSpec(bc=alias).bc is expected

    def test_unknown_bc(self):
        with pytest.raises(ValueError, match="unknown"):
            BCVariant.parse("sideways")

    def test_gamma_sets_partition_the_caps(self):
        for bc in ALL_BCS:
            assert bc.gamma_d | bc.gamma_n == {"upper", "bottom"}
            assert not bc.gamma_d & bc.gamma_n

    def test_dict_round_trip(self):
        spec = DomainSpec(h=0.5, nx=12, ny=8, nz=6, bc="upper")
        assert DomainSpec.from_dict(spec.to_dict()) == spec


class TestMakeDomain:
    def test_neumann_cosine_modes(self):
        d = dom(BCVariant.NEUMANN)
        assert d.basis.kind is BasisKind.COSINE_NEUMANN
        assert list(d.basis.modes) == list(range(8))

    def test_dirichlet_sine_modes(self):
        d = dom(BCVariant.DIRICHLET)
        assert d.basis.kind is BasisKind.SINE_DIRICHLET
        assert list(d.basis.modes) == list(range(1, 9))
        # sin(8 pi zeta) vanishes on the half-offset nodes, so it carries nothing
        assert not d.basis.retained[-1] and d.basis.retained[:-1].all()

    def test_idempotent(self):
        spec = DomainSpec(nx=8, ny=8, nz=8)
        assert make_domain(spec) is make_domain(DomainSpec(nx=8, ny=8, nz=8))

    def test_rejects_non_spec(self):
        with pytest.raises(TypeError):
            make_domain({"nx": 8})

    def test_dealias_band(self):
        d = dom(n=16)
        assert d.dealias_cutoff == (5, 5)
        assert np.abs(d.kx[0][d.horizontal_dealias[0]]).max() == 5


class TestVerticalBasis:
    @pytest.mark.parametrize("bc", ALL_BCS, ids=lambda b: b.value)
    @pytest.mark.parametrize("h", [0.5, 2.0])
    def test_boundary_conditions_hold(self, bc, h):
        b = dom(bc, h=h).basis
        ends = {"bottom": -h, "upper": 0.0}
        for cap, z in ends.items():
            if cap in bc.gamma_d:
                np.testing.assert_allclose(b.values([z])[0], 0.0, atol=1e-13)
            else:
                np.testing.assert_allclose(b.derivatives([z])[0], 0.0, atol=1e-12)

    @pytest.mark.parametrize("bc", ALL_BCS, ids=lambda b: b.value)
    def test_orthogonality_and_norms_by_adaptive_quadrature(self, bc):
        h = 1.5
        b = VerticalBasis(dom(bc, h=h, nz=5).basis.kind, 5, h)
        for i in range(5):
            for j in range(5):
                val, _ = integrate.quad(lambda z: b.values([z])[0, i] * b.values([z])[0, j], -h, 0, limit=200)
                expected = b.norms2[i] if i == j else 0.0
                assert val == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("bc", ALL_BCS, ids=lambda b: b.value)
    def test_means_and_antiderivatives(self, bc):
        h = 0.7
        b = VerticalBasis(dom(bc, h=h, nz=6).basis.kind, 6, h)
        z = np.array([-0.5, -0.1])
        for i in range(6):
            mean, _ = integrate.quad(lambda s: b.values([s])[0, i], -h, 0)
            assert b.means[i] == pytest.approx(mean / h, abs=1e-12)
            for zj, anti in zip(z, b.antiderivatives(z)[:, i]):
                ref, _ = integrate.quad(lambda s: b.values([s])[0, i], -h, zj)
                assert anti == pytest.approx(ref, abs=1e-12)

    @pytest.mark.parametrize("bc", ALL_BCS, ids=lambda b: b.value)
    def test_collocation_weights_integrate_products(self, bc):
        d = dom(bc, n=8, h=2.0)
        b = d.basis
        phi = b.values(d.z)[:, b.retained]
        gram = phi.T @ (d.z_weights[:, None] * phi)
        np.testing.assert_allclose(gram, np.diag(b.norms2[b.retained]), atol=1e-12 * d.h)

    @pytest.mark.parametrize("bc", ALL_BCS, ids=lambda b: b.value)
    def test_fast_transform_matches_matrix(self, bc, rng):
        d = dom(bc, n=8)
        b = d.basis
        c = rng.standard_normal(8) * b.retained
        vals = b.synthesize(c[:, None, None])[:, 0, 0]
        np.testing.assert_allclose(vals, b.values(d.z) @ c, atol=1e-13)
        np.testing.assert_allclose(b.analyze(vals[:, None, None])[:, 0, 0], c, atol=1e-13)


class TestTransforms:
    @given(seed=st.integers(0, 2**16), bci=st.integers(0, 3))
    def test_spectral_round_trip(self, seed, bci):
        d = dom(ALL_BCS[bci], n=8)
        rng = np.random.default_rng(seed)
        c = rng.standard_normal((2,) + d.shape) + 1j * rng.standard_normal((2,) + d.shape)
        # make the coefficients those of a real field on the retained set
        u = d.from_spectral(c)
        c2 = d.to_spectral(u)
        np.testing.assert_allclose(d.from_spectral(c2), u, atol=1e-12)
        np.testing.assert_allclose(d.to_spectral(d.from_spectral(c2)), c2, atol=1e-12)

    def test_single_mode_coefficients(self):
        d = dom(BCVariant.UPPER, n=8, h=2.0)
        z, y, x = d.mesh
        u = np.cos(2 * np.pi * (x - 2 * y)) * np.cos(1.5 * np.pi * (z + 2.0) / 2.0)
        c = d.to_spectral(u)
        # cos = (e^{i.} + e^{-i.})/2 on modes (kx, ky) = +-(1, -2), m = 1
        expected = np.zeros(d.shape, complex)
        expected[1, -2, 1] = expected[1, 2, -1] = 0.5
        np.testing.assert_allclose(c, expected, atol=1e-13)

    def test_evaluate_off_grid(self):
        d = dom(BCVariant.BOTTOM, n=8)
        z, y, x = d.mesh
        f = lambda x, y, z: np.sin(2 * np.pi * x) * np.sin(2.5 * np.pi * (z + 1))
        c = d.to_spectral(f(x, y, z))
        zz = np.array([-0.93, -0.2, 0.0])
        got = d.evaluate(c, zz)
        np.testing.assert_allclose(got, f(x[0][None], y[0][None], zz[:, None, None]), atol=1e-12)

    def test_quadrature_round_trip(self, bc, rng):
        d = dom(bc, n=8)
        c = np.where(d.active, rng.standard_normal((2,) + d.shape), 0.0)
        c = d.to_spectral(d.from_spectral(c))
        np.testing.assert_allclose(d.from_quad(d.to_quad(c)), c, atol=1e-12)

    def test_shape_checks(self):
        d = dom()
        with pytest.raises(ValueError):
            d.to_spectral(np.zeros((4, 4, 4)))
        with pytest.raises(ValueError):
            d.from_spectral_2d(np.zeros((3, 3)))

    def test_thread_cap(self, monkeypatch):
        from primeq.domain import fft_workers

        monkeypatch.setenv("HYDRO_THREADS", "1")
        assert fft_workers() == 1

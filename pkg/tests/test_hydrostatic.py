"""Hydrostatic Helmholtz projection, Stokes operator and its spectrum."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from primeq.domain import BCVariant, DomainSpec
from primeq.fields import SurfaceField, VelocityField, inner, l2_norm, laplacian, vertical_average
from primeq.hydrostatic import (NotSolenoidalError, Projector, apply_semigroup, apply_stokes, divergence_defect,
                                is_solenoidal, project, recover_surface_pressure, spectrum, spectrum_oracle,
                                stokes_operator)
from primeq.random_fields import power_decay, random_field

from conftest import ALL_BCS, dom

TWO_PI = 2 * np.pi


def gradient_field(d, seed):
    """z-independent horizontal gradient of a random mean-zero surface scalar."""
    rng = np.random.default_rng(seed)
    phi = np.where(d.horizontal_dealias, rng.standard_normal(d.shape[1:]) + 1j * rng.standard_normal(d.shape[1:]),
                   0.0)
    phi = d.to_spectral_2d(d.from_spectral_2d(phi))
    phi[0, 0] = 0.0
    return VelocityField(d, np.zeros((2,) + d.shape), np.stack([1j * d.xi_x * phi, 1j * d.xi_y * phi])), phi


def rough(d, seed):
    return random_field(d, seed, power_decay(0.75), solenoidal=False)


class TestProjection:
    @given(seed=st.integers(0, 500), bci=st.integers(0, 3))
    def test_idempotent(self, seed, bci):
        d = dom(ALL_BCS[bci])
        pv = project(rough(d, seed))
        assert l2_norm(project(pv) - pv) <= 1e-13 * l2_norm(pv)

    @given(seed=st.integers(0, 500), bci=st.integers(0, 3))
    def test_orthogonal(self, seed, bci):
        d = dom(ALL_BCS[bci])
        v, u = rough(d, seed), rough(d, seed + 1)
        assert abs(inner(v - project(v), project(u))) <= 1e-12 * l2_norm(v) * l2_norm(u)
        assert l2_norm(project(v)) <= l2_norm(v) * (1 + 1e-14)

    def test_annihilates_gradients(self, bc):
        d = dom(bc)
        g, _ = gradient_field(d, 4)
        assert l2_norm(project(g)) <= 1e-13 * l2_norm(g)

    def test_output_is_solenoidal(self, bc):
        d = dom(bc)
        pv = project(rough(d, 8))
        assert np.abs(Projector(d).constraint(pv.coef)).max() < 1e-14
        assert is_solenoidal(pv)
        assert divergence_defect(rough(d, 8)) > 1e-2

    def test_neumann_matches_2d_poisson_oracle(self):
        # independent route: P v = v - grad q with Lap_H q = div_H vbar, solved on the grid by FFT
        d = dom(BCVariant.NEUMANN, n=16)
        v = rough(d, 2)
        vbar = vertical_average(v).grid
        kx = np.fft.fftfreq(16, 1 / 16)
        KX, KY = np.meshgrid(kx, kx, indexing="xy")
        div = np.fft.fft2(np.fft.ifft2(1j * TWO_PI * KX * np.fft.fft2(vbar[0]))
                          + np.fft.ifft2(1j * TWO_PI * KY * np.fft.fft2(vbar[1])))
        k2 = (TWO_PI**2) * (KX**2 + KY**2)
        q = np.where(k2 > 0, -div / np.where(k2 > 0, k2, 1), 0)
        gx = np.fft.ifft2(1j * TWO_PI * KX * q).real
        gy = np.fft.ifft2(1j * TWO_PI * KY * q).real
        expected = v.grid - np.stack([gx, gy])[:, None]
        np.testing.assert_allclose(project(v).grid, expected, atol=1e-12)

    def test_barotropic_constant_field_kept(self):
        d = dom(BCVariant.NEUMANN)
        v = VelocityField.from_function(d, lambda x, y, z: (np.sin(TWO_PI * y) + 0 * z, np.sin(TWO_PI * x) + 0 * z))
        np.testing.assert_allclose(project(v).coef, v.coef, atol=1e-15)


class TestPressureRecovery:
    def test_recovers_gradient_potential(self, bc):
        d = dom(bc)
        g, phi = gradient_field(d, 11)
        sol = project(rough(d, 12))
        pi = recover_surface_pressure(g + sol)
        np.testing.assert_allclose(pi.coef, phi, atol=1e-12)

    def test_solenoidal_residual_gives_zero_pressure(self, bc):
        d = dom(bc)
        pi = recover_surface_pressure(project(rough(d, 1)))
        assert isinstance(pi, SurfaceField) and np.abs(pi.coef).max() < 1e-13


def decoupled_eigenmode(d, kx=1):
    """v = (0, cos(2 pi kx x) phi_m(z)) with phi_m a mode of zero vertical mean."""
    b = d.basis
    m_idx = int(np.flatnonzero(b.retained & (np.abs(b.means) < 1e-14))[0])
    coef = np.zeros((2,) + d.shape, complex)
    coef[1, m_idx, 0, kx] = coef[1, m_idx, 0, -kx] = 0.5
    return VelocityField(d, coef), TWO_PI**2 * kx**2 + b.eigenvalues[m_idx]


class TestStokesOperator:
    def test_decoupled_eigenmode(self):
        for bc in (BCVariant.NEUMANN, BCVariant.DIRICHLET):
            d = dom(bc)
            v, lam = decoupled_eigenmode(d)
            np.testing.assert_allclose(apply_stokes(v).coef, -lam * v.coef, atol=1e-12)

    def test_perpendicular_mode_of_coupled_profile(self, bc):
        # v perpendicular to k has zero horizontal divergence for every profile
        d = dom(bc)
        b = d.basis
        i = int(np.flatnonzero(b.retained)[0])
        coef = np.zeros((2,) + d.shape, complex)
        coef[1, i, 0, 2] = coef[1, i, 0, -2] = 0.5
        v = VelocityField(d, coef)
        np.testing.assert_allclose(apply_stokes(v).coef, -(16 * np.pi**2 + b.eigenvalues[i]) * coef, atol=1e-11)

    def test_constrained_branch_eigenvectors(self, bc):
        d = dom(bc, n=8)
        op = stokes_operator(d)
        kappa, w = op.constrained_block
        if bc is BCVariant.NEUMANN:
            assert kappa.size == 0
            return
        sw = np.sqrt(d.basis.norms2)
        prof = w[:, 0] / sw
        coef = np.zeros((2,) + d.shape, complex)
        coef[0, :, 0, 1] = coef[0, :, 0, -1] = 0.5 * prof
        v = VelocityField(d, coef)
        assert is_solenoidal(v)
        np.testing.assert_allclose(apply_stokes(v).coef, -(TWO_PI**2 + kappa[0]) * coef, atol=1e-10)

    def test_negative_semidefinite_and_symmetric(self, bc):
        d = dom(bc)
        u, v = project(rough(d, 1)), project(rough(d, 2))
        assert inner(apply_stokes(u), v) == pytest.approx(inner(u, apply_stokes(v)), rel=1e-11)
        assert inner(apply_stokes(u), u) <= 0

    def test_equals_projected_laplacian(self, bc):
        d = dom(bc)
        v = project(rough(d, 3))
        np.testing.assert_allclose(apply_stokes(v).coef, project(laplacian(v)).coef, atol=1e-10)

    def test_rejects_non_solenoidal(self):
        d = dom()
        with pytest.raises(NotSolenoidalError):
            apply_stokes(rough(d, 1))

    def test_shifted_solve(self, bc):
        d = dom(bc)
        op = stokes_operator(d)
        x = project(rough(d, 5))
        a, b = 1.0, 0.003
        rhs = x.coef - b * apply_stokes(x).coef
        np.testing.assert_allclose(op.solve_shifted(rhs, a, b), x.coef, atol=1e-12)


class TestSemigroup:
    def test_decoupled_mode_decays_exactly(self):
        d = dom(BCVariant.DIRICHLET)
        v, lam = decoupled_eigenmode(d)
        np.testing.assert_allclose(apply_semigroup(v, 0.01).coef, math.exp(-lam * 0.01) * v.coef, atol=1e-14)

    @given(s=st.floats(0, 0.2), t=st.floats(0, 0.2), bci=st.integers(0, 3))
    def test_composition(self, s, t, bci):
        d = dom(ALL_BCS[bci])
        v = project(rough(d, 3))
        a = apply_semigroup(v, s + t)
        b = apply_semigroup(apply_semigroup(v, s), t)
        assert l2_norm(a - b) <= 1e-13 * l2_norm(v)

    def test_generator_is_stokes_operator(self, bc):
        d = dom(bc)
        v = project(random_field(d, 7, power_decay(3.0)))
        eps = 1e-6
        fd = (apply_semigroup(v, eps).coef - apply_semigroup(v, 0).coef) / eps
        av = apply_stokes(v).coef
        assert np.abs(fd - av).max() <= 1e-4 * np.abs(av).max()

    def test_contractive(self, bc):
        d = dom(bc)
        v = project(rough(d, 1))
        norms = [l2_norm(apply_semigroup(v, t)) for t in (0, 0.01, 0.1, 1)]
        assert all(b <= a * (1 + 1e-14) for a, b in zip(norms, norms[1:]))

    def test_negative_time(self):
        with pytest.raises(ValueError):
            apply_semigroup(random_field(dom(), 0), -1.0)


def independent_secular_roots(bc, n, h):
    """Constrained-branch eigenvalues from closed-form basis means and norms."""
    if bc is BCVariant.DIRICHLET:
        m = np.arange(1, n, 2)
        nu = m * np.pi / h
        beta = 2 / (m * np.pi)
    else:
        m = np.arange(n)
        nu = (m + 0.5) * np.pi / h
        beta = 1 / ((m + 0.5) * np.pi)
    mu, c2 = nu**2, beta**2 / (h / 2)
    f = lambda x: np.sum(c2 / (mu - x))
    return np.array([optimize.brentq(f, a * (1 + 1e-12), b * (1 - 1e-12), xtol=1e-13, rtol=1e-15)
                     for a, b in zip(mu[:-1], mu[1:])])


class TestSpectrum:
    def test_neumann_smallest_values(self):
        rep = spectrum(dom(BCVariant.NEUMANN, n=16), 6)
        vals = rep.values(6)
        # constant vectors (multiplicity 2), then the first vertical mode at k = 0 (multiplicity 2),
        # then 4 pi^2 from the barotropic |k| = 1 modes
        np.testing.assert_allclose(vals, [0, 0, np.pi**2, np.pi**2, 4 * np.pi**2, 4 * np.pi**2], atol=1e-12)
        assert rep.smallest == 0.0

    @pytest.mark.parametrize("bc", ALL_BCS[1:], ids=lambda b: b.value)
    @pytest.mark.parametrize("h", [0.5, 1.0, 2.0])
    def test_positive_gap_with_dirichlet_part(self, bc, h):
        rep = spectrum(dom(bc, n=8, h=h), 4)
        assert rep.smallest >= min((np.pi / (2 * h)) ** 2, 4 * np.pi**2) * (1 - 1e-12)

    @pytest.mark.parametrize("bc", ALL_BCS[1:], ids=lambda b: b.value)
    def test_constrained_branch_matches_independent_secular_equation(self, bc):
        h = 0.5
        d = dom(bc, n=4, h=h, nz=16)
        kappa, _ = stokes_operator(d).constrained_block
        np.testing.assert_allclose(kappa, independent_secular_roots(bc, 16, h), rtol=1e-11)

    @pytest.mark.parametrize("bc,root_eq,bracket", [
        (BCVariant.DIRICHLET, lambda s: np.tan(s / 2) - s / 2, (8.5, 9.2)),
        (BCVariant.UPPER, lambda s: np.tan(s) - s, (4.3, 4.6)),
        (BCVariant.BOTTOM, lambda s: np.tan(s) - s, (4.3, 4.6)),
    ], ids=["dirichlet", "upper", "bottom"])
    def test_constrained_branch_converges_to_continuum(self, bc, root_eq, bracket):
        # phi'' + kappa phi = const with zero mean: tan(s/2) = s/2 (both ends clamped),
        # tan(s) = s (one clamped end); truncation error decays like nz^-3
        s = optimize.brentq(root_eq, *bracket)
        errs = [abs(stokes_operator(dom(bc, n=4, nz=nz)).constrained_block[0][0] / s**2 - 1) for nz in (16, 32)]
        assert errs[1] < 1e-5 and errs[0] / errs[1] > 6

    def test_report_matches_oracle_and_counts(self, bc):
        d = dom(bc, n=8)
        rep = spectrum(d, 40)
        assert sum(e.multiplicity for e in rep.entries) >= 40
        np.testing.assert_allclose(rep.values(40), spectrum_oracle(d.spec, 40), rtol=1e-12, atol=1e-12)

    def test_full_count_equals_dimension(self, bc):
        d = dom(bc, n=4, nz=4)
        rep = spectrum(d)
        nh = int(d.horizontal_retained.sum())
        # one scalar constraint per nonzero horizontal wavenumber
        dim = 2 * int(d.basis.retained.sum()) * nh - (nh - 1)
        assert sum(e.multiplicity for e in rep.entries) == dim

    def test_count_too_large(self):
        with pytest.raises(ValueError):
            spectrum(dom(n=4, nz=4), 10**6)

    def test_csv_columns(self):
        text = spectrum(dom(), 3).to_csv()
        assert text.splitlines()[0] == "index,eigenvalue,kx,ky,m,multiplicity"

    def test_eigenvalues_of_operator_matrix(self, bc):
        # assemble -A on the solenoidal space explicitly at a tiny resolution
        d = dom(bc, n=4, nz=4)
        p = Projector(d)
        basis = []
        rng = np.random.default_rng(0)
        for _ in range(300):
            c = np.where(d.retained, rng.standard_normal((2,) + d.shape) + 1j * rng.standard_normal((2,) + d.shape),
                         0.0)
            basis.append(d.to_spectral(d.from_spectral(p.apply_coef(d.to_spectral(d.from_spectral(c))))))
        w = np.sqrt(d.mode_weights)[None]
        mats = np.array([(b * w)[np.broadcast_to(d.retained, b.shape)] for b in basis])
        mats = np.concatenate([mats.real, mats.imag], axis=1)
        q, s, _ = np.linalg.svd(mats.T, full_matrices=False)
        q = q[:, s > 1e-8 * s[0]]
        cols = []
        for j in range(q.shape[1]):
            vec = q[:, j]
            n = vec.size // 2
            full = np.zeros((2,) + d.shape, complex)
            full[np.broadcast_to(d.retained, full.shape)] = (vec[:n] + 1j * vec[n:])
            full = full / w
            out = p.apply_coef(d.symbol * full) * w
            r = out[np.broadcast_to(d.retained, out.shape)]
            cols.append(np.concatenate([r.real, r.imag]))
        a = q.T @ np.array(cols).T
        ev = np.sort(np.linalg.eigvalsh((a + a.T) / 2))
        np.testing.assert_allclose(ev, spectrum_oracle(d.spec)[: ev.size], rtol=1e-9, atol=1e-9)

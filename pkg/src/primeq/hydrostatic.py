"""Hydrostatic Helmholtz projection, hydrostatic Stokes operator and its spectrum.

For every horizontal wavenumber k != 0 the solenoidal constraint
div_H vbar = 0 is a single linear condition on the vertical coefficient
vectors (v1_m, v2_m):

    c . a = sum_m beta_m (xi_1 a_{1,m} + xi_2 a_{2,m}) = 0,

with beta_m the vertical mean of basis function m.  The projection is the
L^2-orthogonal projection onto that hyperplane, i.e. it removes a multiple of

    n_{i,m} = xi_i beta_m / ||phi_m||^2,

the Galerkin image of a z-independent horizontal gradient.  For the Neumann
basis n lives on m = 0 only and the projection subtracts a z-independent
gradient; for bases without constants the gradient is represented through
its Galerkin projection.
"""
from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .domain import BCVariant, Domain, DomainSpec, make_domain
from .fields import SurfaceField, VelocityField

__all__ = [
    "Projector",
    "StokesOperator",
    "stokes_operator",
    "SpectrumEntry",
    "SpectrumReport",
    "galerkin",
    "project",
    "is_solenoidal",
    "divergence_defect",
    "recover_surface_pressure",
    "apply_stokes",
    "spectrum",
    "spectrum_oracle",
    "apply_semigroup",
    "NotSolenoidalError",
]


class NotSolenoidalError(ValueError):
    """Raised when an operator defined on solenoidal fields gets a non-solenoidal input."""


def galerkin(v: VelocityField) -> VelocityField:
    """Fold a z-independent part into the basis by L^2 projection."""
    if v.const is None:
        return v
    d = v.domain
    b = d.basis
    prof = (d.h * b.means / b.norms2 * b.retained)[:, None, None]
    return VelocityField(d, v.coef + prof * v.const[:, None], None, v.family)


@dataclass(frozen=True, eq=False)
class Projector:
    """Hydrostatic Helmholtz projection on one domain.  Pressure gauge: zero mean."""

    domain: Domain

    @functools.cached_property
    def beta(self) -> np.ndarray:
        b = self.domain.basis
        return b.means * b.retained

    @functools.cached_property
    def normal_profile(self) -> np.ndarray:
        b = self.domain.basis
        return self.beta / b.norms2

    @functools.cached_property
    def gamma(self) -> float:
        return float(np.sum(self.beta * self.normal_profile))

    @functools.cached_property
    def inv_xi2(self) -> np.ndarray:
        d = self.domain
        with np.errstate(divide="ignore"):
            out = np.where(d.xi_h2 > 0, 1.0 / np.where(d.xi_h2 > 0, d.xi_h2, 1.0), 0.0)
        return out

    def constraint(self, coef: np.ndarray) -> np.ndarray:
        """c . a per horizontal wavenumber: (ny, nx); equals i^{-1} times the
        Fourier coefficient of div_H vbar."""
        d = self.domain
        s = d.xi_x * coef[0] + d.xi_y * coef[1]
        return np.einsum("m,myx->yx", self.beta, s)

    def gradient_amplitude(self, coef: np.ndarray) -> np.ndarray:
        """t(k) with (1 - P) a = t n."""
        return self.constraint(coef) * self.inv_xi2 / self.gamma

    def apply_coef(self, coef: np.ndarray) -> np.ndarray:
        d = self.domain
        t = self.gradient_amplitude(coef)
        prof = self.normal_profile[:, None, None]
        out = coef.copy()
        out[0] -= d.xi_x * t * prof
        out[1] -= d.xi_y * t * prof
        return out

    def __call__(self, v: VelocityField) -> VelocityField:
        v = galerkin(v)
        if v.family != "primal":
            raise ValueError("projection acts on primal-family fields")
        return VelocityField(v.domain, self.apply_coef(v.coef))


@functools.lru_cache(maxsize=32)
def _projector(domain: Domain) -> Projector:
    return Projector(domain)


def project(v: VelocityField) -> VelocityField:
    """Hydrostatic Helmholtz projection P v."""
    return _projector(v.domain)(v)


def divergence_defect(v: VelocityField) -> float:
    """||div_H vbar||_{L^2(G)} relative to the horizontal-gradient scale of v."""
    v = galerkin(v)
    d = v.domain
    p = _projector(d)
    num = np.sqrt(np.sum(np.abs(p.constraint(v.coef)) ** 2))
    scale = np.sqrt(np.sum(np.abs(v.coef) ** 2 * d.xi_h2[None, None] * d.mode_weights[None]) / d.h)
    if scale == 0.0:
        return 0.0
    return float(num / scale)


def is_solenoidal(v: VelocityField, tol: float = 1e-8) -> bool:
    return divergence_defect(v) <= tol


def recover_surface_pressure(residual: VelocityField) -> SurfaceField:
    """Mean-zero surface pressure whose gradient is the gradient part of ``residual``.

    ``residual`` is f - v_t - (v.grad_H v + w d_z v) + Delta v at one time.
    """
    r = galerkin(residual)
    d = r.domain
    t = _projector(d).gradient_amplitude(r.coef)
    pi = -1j * t / d.h
    pi[0, 0] = 0.0
    return SurfaceField(d, pi)


@dataclass(frozen=True, eq=False)
class StokesOperator:
    """A = P Delta on the solenoidal Galerkin space, with per-mode symbol
    lambda(k, m) = 4 pi^2 |k|^2 + nu_m^2 and the vertical constrained block
    resolved once per domain."""

    domain: Domain
    shift: float = 0.0

    @property
    def symbol(self) -> np.ndarray:
        return self.domain.symbol

    @functools.cached_property
    def _weights(self) -> np.ndarray:
        return self.domain.basis.norms2

    @functools.cached_property
    def coupled(self) -> np.ndarray:
        """Vertical modes entering the constraint (nonzero mean)."""
        b = self.domain.basis
        return b.retained & (np.abs(b.means) > 1e-14)

    @functools.cached_property
    def decoupled(self) -> np.ndarray:
        b = self.domain.basis
        return b.retained & ~self.coupled

    @functools.cached_property
    def constrained_block(self) -> tuple:
        """Eigen-decomposition of the vertical operator -d_z^2 compressed to the
        zero-mean subspace of the coupled modes.

        Returns (kappa, W) with W[:, j] in weighted-orthonormal coordinates
        over all vertical modes (zero outside the coupled set).
        """
        b = self.domain.basis
        idx = np.flatnonzero(self.coupled)
        nz = b.nmodes
        if idx.size <= 1:
            return np.zeros(0), np.zeros((nz, 0))
        chat = b.means[idx] / np.sqrt(self._weights[idx])
        chat = chat / np.linalg.norm(chat)
        # orthonormal basis of the complement of chat
        q, _ = np.linalg.qr(np.column_stack([chat, np.eye(idx.size)]))
        comp = q[:, 1 : idx.size]
        k = comp.T @ (b.eigenvalues[idx][:, None] * comp)
        kappa, u = np.linalg.eigh((k + k.T) / 2)
        w = np.zeros((nz, kappa.size))
        w[idx] = comp @ u
        return kappa, w

    def decompose(self, coef: np.ndarray) -> tuple:
        """Split coefficients into k-parallel and k-perpendicular scalar profiles."""
        d = self.domain
        mag = np.sqrt(d.xi_h2)
        safe = np.where(mag > 0, mag, 1.0)
        ex, ey = d.xi_x / safe, d.xi_y / safe
        par = ex * coef[0] + ey * coef[1]
        perp = -ey * coef[0] + ex * coef[1]
        return par, perp, (ex, ey)

    def recompose(self, par, perp, e) -> np.ndarray:
        ex, ey = e
        return np.stack([ex * par - ey * perp, ey * par + ex * perp])

    def apply_function(self, coef: np.ndarray, fn) -> np.ndarray:
        """Apply g(-A) for a scalar function g on solenoidal coefficients.

        ``fn`` maps an array of -A eigenvalues to multipliers.
        """
        d = self.domain
        out = np.zeros_like(coef)
        k0 = d.xi_h2 == 0
        lam = self.symbol
        # k = 0 and all decoupled/perpendicular directions are diagonal
        mult = fn(lam)
        par, perp, e = self.decompose(coef)
        perp_new = mult * perp
        dec = self.decoupled[:, None, None]
        par_new = np.where(dec, mult * par, 0.0)
        kappa, w = self.constrained_block
        if kappa.size:
            sw = np.sqrt(self._weights)[:, None, None]
            pt = par * sw
            modal = np.einsum("mj,myx->jyx", w, pt)
            modal = modal * fn(d.xi_h2[None] + kappa[:, None, None])
            par_new = par_new + np.einsum("mj,jyx->myx", w, modal) / sw
        out = self.recompose(par_new, perp_new, e)
        out[:, :, k0] = mult[None][:, :, k0] * coef[:, :, k0]
        return np.where(d.retained, out, 0.0)

    def solve_shifted(self, rhs: np.ndarray, a: float, b: float) -> np.ndarray:
        """Solve (a I - b A) x = rhs on the solenoidal space (rhs solenoidal).

        Exact per-mode solve: x = M r - (c.M r)/(c.M n) M n with
        M = (a + b lambda)^{-1}.
        """
        d = self.domain
        p = _projector(d)
        m_inv = 1.0 / (a + b * self.symbol)
        x = m_inv * rhs
        n_prof = p.normal_profile[:, None, None]
        cmx = p.constraint(x)
        cmn = d.xi_h2 * np.einsum("m,myx->yx", p.beta * p.normal_profile, m_inv)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(cmn != 0, cmx / np.where(cmn != 0, cmn, 1.0), 0.0)
        x[0] -= t * d.xi_x * m_inv * n_prof
        x[1] -= t * d.xi_y * m_inv * n_prof
        return x

    def __call__(self, v: VelocityField) -> VelocityField:
        return apply_stokes(v)


@functools.lru_cache(maxsize=32)
def stokes_operator(domain: Domain) -> StokesOperator:
    return StokesOperator(domain)


def apply_stokes(v: VelocityField, tol: float = 1e-8) -> VelocityField:
    """A v = P Delta v for solenoidal v."""
    v = galerkin(v)
    if v.family != "primal":
        raise ValueError("the Stokes operator acts on primal-family fields")
    if divergence_defect(v) > tol:
        raise NotSolenoidalError("input is not hydrostatically solenoidal; project it first")
    d = v.domain
    return VelocityField(d, _projector(d).apply_coef(-d.symbol * v.coef))


def apply_semigroup(v0: VelocityField, t: float) -> VelocityField:
    """e^{tA} v0 for solenoidal v0 (v0 is projected first)."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    v = project(v0)
    op = stokes_operator(v.domain)
    return VelocityField(v.domain, op.apply_function(v.coef, lambda lam: np.exp(-lam * t)))


# -- spectrum ---------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumEntry:
    eigenvalue: float
    kx: int
    ky: int
    m: int
    multiplicity: int
    branch: str = "decoupled"


@dataclass
class SpectrumReport:
    """Smallest eigenvalues of -A with (k, m) labels and multiplicities."""

    entries: list
    bc: BCVariant
    h: float

    @property
    def smallest(self) -> float:
        return self.entries[0].eigenvalue if self.entries else float("nan")

    def values(self, count: int | None = None) -> np.ndarray:
        """Eigenvalues repeated by multiplicity (first ``count``)."""
        vals = np.repeat([e.eigenvalue for e in self.entries], [e.multiplicity for e in self.entries])
        return vals if count is None else vals[:count]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "kx", "ky", "m", "multiplicity"])
        for i, e in enumerate(self.entries):
            w.writerow([i, repr(float(e.eigenvalue)), e.kx, e.ky, e.m, e.multiplicity])
        return buf.getvalue()


def _horizontal_modes(domain: Domain):
    d = domain
    kx = np.broadcast_to(d.kx, d.shape[1:])[d.horizontal_retained]
    ky = np.broadcast_to(d.ky, d.shape[1:])[d.horizontal_retained]
    return kx, ky


def _collect(entries: list, count: int | None) -> list:
    entries.sort(key=lambda e: (e.eigenvalue, e.m, abs(e.kx) + abs(e.ky), e.kx, e.ky, e.branch))
    if count is None:
        return entries
    out, total = [], 0
    for e in entries:
        if total >= count:
            break
        out.append(e)
        total += e.multiplicity
    return out


def spectrum(op: StokesOperator | Domain, count: int | None = None) -> SpectrumReport:
    """Eigenvalues of -A on the retained modes of the domain.

    Diagonal parts are read off the symbol; the constrained k-parallel block
    comes from the eigen-decomposition of the compressed vertical operator.
    """
    if isinstance(op, Domain):
        op = stokes_operator(op)
    d = op.domain
    b = d.basis
    total = 2 * int(b.retained.sum()) * int(d.horizontal_retained.sum())
    if count is not None and count > total:
        raise ValueError(f"count {count} exceeds the number of retained modes {total}")
    kappa, _ = op.constrained_block
    mu = b.eigenvalues
    modes = b.modes
    entries = []
    for kx, ky in zip(*_horizontal_modes(d)):
        xi2 = 4 * np.pi**2 * (kx * kx + ky * ky)
        for i in np.flatnonzero(b.retained):
            if kx == 0 and ky == 0:
                entries.append(SpectrumEntry(float(mu[i]), int(kx), int(ky), int(modes[i]), 2))
            elif op.decoupled[i]:
                entries.append(SpectrumEntry(float(xi2 + mu[i]), int(kx), int(ky), int(modes[i]), 2))
            else:
                entries.append(SpectrumEntry(float(xi2 + mu[i]), int(kx), int(ky), int(modes[i]), 1, "perpendicular"))
        if kx == 0 and ky == 0:
            continue
        for kap in kappa:
            below = np.flatnonzero(op.coupled & (mu < kap))
            label = int(modes[below[-1]]) if below.size else int(modes[0])
            entries.append(SpectrumEntry(float(xi2 + kap), int(kx), int(ky), label, 1, "constrained"))
    return SpectrumReport(_collect(entries, count), d.bc, d.h)


def _secular_roots(mu: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Roots of sum_m c2_m / (mu_m - x) = 0 strictly between consecutive poles."""
    order = np.argsort(mu)
    mu, c2 = mu[order], c2[order]
    roots = []
    f = lambda x: np.sum(c2 / (mu - x))
    for lo, hi in zip(mu[:-1], mu[1:]):
        eps = 1e-13 * max(1.0, hi)
        roots.append(optimize.brentq(f, lo + eps, hi - eps, xtol=1e-14 * hi, rtol=1e-15, maxiter=500))
    return np.array(roots)


def spectrum_oracle(spec: DomainSpec, count: int | None = None, *, separable_only: bool = False) -> np.ndarray:
    """Independent eigenvalue list of -A by separation of variables.

    Every (k, m) contributes lambda = 4 pi^2 |k|^2 + nu_m^2; for k != 0 the
    solenoidal constraint removes the k-parallel direction of each mode with
    nonzero vertical mean.  Unless ``separable_only`` is set, the
    k-parallel constrained branch is added from the secular equation
    sum_m beta_m^2/||phi_m||^2 / (nu_m^2 - kappa) = 0 solved by bracketing.
    """
    d = make_domain(spec)
    b = d.basis
    keep = b.retained
    mu = b.eigenvalues[keep]
    beta = b.means[keep]
    coupled = np.abs(beta) > 1e-14
    kappa = np.zeros(0)
    if not separable_only and coupled.sum() > 1:
        kappa = _secular_roots(mu[coupled], beta[coupled] ** 2 / b.norms2[keep][coupled])
    kx, ky = _horizontal_modes(d)
    vals = []
    for a, c in zip(kx, ky):
        xi2 = 4 * np.pi**2 * (a * a + c * c)
        if a == 0 and c == 0:
            vals.extend(np.repeat(mu, 2))
            continue
        vals.extend(xi2 + mu)
        vals.extend(xi2 + mu[~coupled])
        vals.extend(xi2 + kappa)
    vals = np.sort(np.asarray(vals))
    return vals if count is None else vals[:count]

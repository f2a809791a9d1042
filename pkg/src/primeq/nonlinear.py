"""Hydrostatic advection F(v, v') = P(v . grad_H v' + w(v) d_z v').

Products are formed on a Gauss-Legendre grid in z and on the collocation
grid in x, y.  Inputs are truncated to the 2/3 band horizontally; the z
quadrature is exact for products of three retained basis functions, so the
L^2 projection back onto the basis is the exact Galerkin projection.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .domain import Domain, DomainSpec, make_domain
from .fields import VelocityField, inner
from .hydrostatic import galerkin, project
from .norms import sobolev_norm
from .random_fields import power_decay, random_field

__all__ = [
    "NonlinearEvaluator",
    "QuadFields",
    "quad_fields",
    "advect",
    "advect_divergence_form",
    "advection_raw",
    "energy_residual",
    "barotropic_reference",
    "ProbeResult",
    "bilinear_estimate_probe",
    "bilinear_ratio",
]


@dataclass(frozen=True)
class QuadFields:
    """Velocity, its derivatives and w(v) on the quadrature grid, each (.., Q, ny, nx)."""

    u: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dz: np.ndarray
    w: np.ndarray | None


def _dealias(v: VelocityField) -> VelocityField:
    d = v.domain
    const = None if v.const is None else np.where(d.horizontal_dealias, v.const, 0.0)
    return VelocityField(d, np.where(d.active, v.coef, 0.0), const, v.family)


def quad_fields(v: VelocityField, need_w: bool = True) -> QuadFields:
    """Evaluate a primal field and its first derivatives on the quadrature grid."""
    if v.family != "primal":
        raise ValueError("quadrature evaluation expects a primal-family field")
    d = v.domain
    c = v.coef
    stack = np.stack([c, 1j * d.xi_x * c, 1j * d.xi_y * c])
    vals = d.to_quad(stack, "values")
    dz = d.to_quad(c, "dz")
    w = None
    if need_w:
        w = -d.to_quad(1j * (d.xi_x * c[0] + d.xi_y * c[1]), "anti")
    if v.const is not None:
        zq, _ = d.quad_nodes
        k = v.const
        extra = d.from_spectral_2d(np.stack([k, 1j * d.xi_x * k, 1j * d.xi_y * k]))
        vals = vals + extra[:, :, None]
        if need_w:
            dk = 1j * (d.xi_x * k[0] + d.xi_y * k[1])
            w = w - (zq + d.h)[:, None, None] * d.from_spectral_2d(dk)[None]
    return QuadFields(vals[0], vals[1], vals[2], dz, w)


def advection_raw(v: VelocityField, vp: VelocityField) -> np.ndarray:
    """Galerkin coefficients of v . grad_H v' + w(v) d_z v' before projection."""
    d = v.domain
    a = quad_fields(_dealias(v))
    b = quad_fields(_dealias(vp), need_w=False)
    g = a.u[0][None] * b.dx + a.u[1][None] * b.dy + a.w[None] * b.dz
    return d.from_quad(g, "project")


class NonlinearEvaluator:
    """F(v, v') on one domain.  ``enabled=False`` gives the linear regime."""

    def __init__(self, domain: Domain, enabled: bool = True):
        self.domain = domain
        self.enabled = enabled

    def __call__(self, v: VelocityField, vp: VelocityField | None = None) -> VelocityField:
        if not self.enabled:
            return VelocityField.zeros(self.domain)
        return advect(v, v if vp is None else vp)


def advect(v: VelocityField, vp: VelocityField) -> VelocityField:
    """F(v, v') = P(v . grad_H v' + w(v) d_z v'), dealiased and projected."""
    if v.domain.spec != vp.domain.spec:
        raise ValueError("fields live on different domains")
    return project(VelocityField(v.domain, advection_raw(v, vp)))


def advect_divergence_form(v: VelocityField, vp: VelocityField) -> VelocityField:
    """P div(v' (x) u) with transport velocity u = (v, w(v)).

    The z-flux w(v) v' vanishes at both ends for solenoidal v, so its
    derivative is projected in weak form.  Agrees with :func:`advect` because
    div_H v + d_z w = 0.
    """
    d = v.domain
    a = quad_fields(_dealias(v))
    vpq = quad_fields(_dealias(vp), need_w=False).u
    fx = d.from_quad(a.u[0][None] * vpq, "project")
    fy = d.from_quad(a.u[1][None] * vpq, "project")
    fz = d.from_quad(a.w[None] * vpq, "project_dz")
    coef = 1j * d.xi_x * fx + 1j * d.xi_y * fy + fz
    return project(VelocityField(d, coef))


def energy_residual(v: VelocityField) -> float:
    """<F(v, v), v>_{L^2}; vanishes analytically for solenoidal v."""
    return inner(advect(v, v), galerkin(v))


def barotropic_reference(u_hat: np.ndarray, domain: Domain) -> np.ndarray:
    """Projected 2D advection P_2D (u . grad u) on the torus by direct triadic sums.

    ``u_hat`` has shape (2, ny, nx) in FFT ordering.  Products are truncated
    to the 2/3 band, which is what a dealiased pseudo-spectral product yields.
    """
    d = domain
    band = d.horizontal_dealias
    u_hat = np.where(band, u_hat, 0.0)
    iy, ix = np.nonzero(np.any(u_hat != 0, axis=0))
    kx = d.kx[0, ix]
    ky = d.ky[iy, 0]
    up = u_hat[:, iy, ix]  # (2, n)
    out = np.zeros_like(u_hat)
    ny, nx = d.shape[1:]
    cx, cy = d.dealias_cutoff
    for j in range(kx.size):  # mode q carries the gradient
        sx = kx + kx[j]
        sy = ky + ky[j]
        keep = (np.abs(sx) <= cx) & (np.abs(sy) <= cy)
        if not np.any(keep):
            continue
        dot = up[0, keep] * (2j * np.pi * kx[j]) + up[1, keep] * (2j * np.pi * ky[j])
        for c in range(2):
            np.add.at(out[c], (sy[keep] % ny, sx[keep] % nx), dot * up[c, j])
    xi2 = d.xi_h2
    safe = np.where(xi2 > 0, xi2, 1.0)
    div = (d.xi_x * out[0] + d.xi_y * out[1]) / safe
    res = np.stack([out[0] - d.xi_x * div, out[1] - d.xi_y * div])
    res[:, xi2 == 0] = out[:, xi2 == 0]
    return res


@dataclass
class ProbeResult:
    """Ratios ||F(v, v')||_{H^s} / (||v||_{H^{s+3/2}} ||v'||_{H^{s+3/2}}) over sampled pairs."""

    ratios: np.ndarray
    seeds: np.ndarray
    resolution: int
    s: float

    @property
    def max(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    @property
    def median(self) -> float:
        return float(np.median(self.ratios)) if self.ratios.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "resolution", "s", "ratio"])
        for seed, r in zip(self.seeds, self.ratios):
            w.writerow([int(seed), self.resolution, self.s, repr(float(r))])
        return buf.getvalue()


def bilinear_ratio(v: VelocityField, vp: VelocityField, s: float) -> float:
    den = sobolev_norm(v, s + 1.5) * sobolev_norm(vp, s + 1.5)
    if den == 0.0:
        return 0.0
    return sobolev_norm(advect(v, vp), s) / den


def bilinear_estimate_probe(samples: int, s: float = 0.0, *, resolution: int = 16,
                            bc: str = "neumann", h: float = 1.0, seed: int = 0,
                            gamma: float = 2.0) -> ProbeResult:
    """Empirical ratios of the bilinear estimate over seeded random pairs.

    Pair i uses seeds (seed + 2i, seed + 2i + 1); fields have Gaussian
    coefficients with decay (1 + lambda)^(-gamma).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    d = make_domain(DomainSpec(h=h, nx=resolution, ny=resolution, nz=resolution, bc=bc))
    amp = power_decay(gamma)
    ratios, seeds = [], []
    for i in range(samples):
        sa = seed + 2 * i
        v = random_field(d, sa, amp)
        vp = random_field(d, sa + 1, amp)
        ratios.append(bilinear_ratio(v, vp, s))
        seeds.append(sa)
    return ProbeResult(np.array(ratios), np.array(seeds), resolution, s)

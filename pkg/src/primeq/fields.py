"""Fields on the domain and the basic field calculus.

A :class:`VelocityField` stores spectral coefficients in the vertical basis of
its domain plus an optional z-independent part ``const``.  The z-independent
part is only needed when the basis cannot represent constants in z (any
variant with a Dirichlet boundary), e.g. for the fluctuation v - vbar.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .domain import BasisKind, Domain

__all__ = [
    "VelocityField",
    "SurfaceField",
    "ScalarField3D",
    "vertical_average",
    "fluctuation",
    "vertical_velocity",
    "vertical_velocity_at",
    "grad_h",
    "div_h",
    "laplacian",
    "d_z",
    "inner",
    "l2_norm",
    "grad_norm2",
]


def _as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=complex)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Horizontal velocity v = (v1, v2) on the domain.

    ``coef`` has shape (2, nz, ny, nx); ``const`` (2, ny, nx) or None.
    ``family`` is ``"primal"`` for the domain basis or ``"dual"`` for the
    partner basis produced by one z-derivative.
    """

    domain: Domain
    coef: np.ndarray
    const: np.ndarray | None = None
    family: str = "primal"

    def __post_init__(self):
        coef = _as_complex(self.coef)
        if coef.shape != (2,) + self.domain.shape:
            raise ValueError(f"velocity coefficients must have shape {(2,) + self.domain.shape}, got {coef.shape}")
        coef = np.where(self.domain.retained, coef, 0.0)
        const = self.const
        if const is not None:
            const = _as_complex(const)
            if const.shape != (2,) + self.domain.shape[1:]:
                raise ValueError("z-independent part must have shape (2, ny, nx)")
            const = np.where(self.domain.horizontal_retained, const, 0.0)
            if self.family != "primal":
                raise ValueError("dual-family fields carry no z-independent part")
            if self.domain.basis.kind is BasisKind.COSINE_NEUMANN:
                coef = coef.copy()
                coef[:, 0] += const
                const = None
            elif not np.any(const):
                const = None
        if not np.all(np.isfinite(coef)) or (const is not None and not np.all(np.isfinite(const))):
            raise ValueError("velocity field has non-finite entries")
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "const", const)

    # -- constructors ---------------------------------------------------------
    @classmethod
    def zeros(cls, domain: Domain) -> "VelocityField":
        return cls(domain, np.zeros((2,) + domain.shape, dtype=complex))

    @classmethod
    def from_grid(cls, domain: Domain, values: np.ndarray) -> "VelocityField":
        values = np.asarray(values, dtype=float)
        if values.shape != (2,) + domain.shape:
            raise ValueError(f"grid values must have shape {(2,) + domain.shape}, got {values.shape}")
        return cls(domain, domain.to_spectral(values))

    @classmethod
    def from_function(cls, domain: Domain, func) -> "VelocityField":
        """Sample ``func(x, y, z) -> (v1, v2)`` on the collocation grid."""
        z, y, x = domain.mesh
        v1, v2 = func(x, y, z)
        return cls.from_grid(domain, np.stack([np.broadcast_to(v1, z.shape), np.broadcast_to(v2, z.shape)]))

    # -- views ------------------------------------------------------------------
    @functools.cached_property
    def grid(self) -> np.ndarray:
        """Values on the collocation grid, shape (2, nz, ny, nx)."""
        d = self.domain
        if self.family == "primal":
            out = d.from_spectral(self.coef)
        else:
            out = d.evaluate(self.coef, d.z, family="dual")
        if self.const is not None:
            out = out + d.from_spectral_2d(self.const)[:, None]
        return out

    def at(self, z) -> np.ndarray:
        """Values at depths ``z`` on the horizontal grid, shape (2, len(z), ny, nx)."""
        out = self.domain.evaluate(self.coef, z, family=self.family)
        if self.const is not None:
            out = out + self.domain.from_spectral_2d(self.const)[:, None]
        return out

    def on_quad(self) -> np.ndarray:
        """Values on the Gauss-Legendre quadrature grid (2, Q, ny, nx)."""
        which = "values" if self.family == "primal" else "dual"
        out = self.domain.to_quad(self.coef, which, band=False)
        if self.const is not None:
            out = out + self.domain.from_spectral_2d(self.const)[:, None]
        return out

    @property
    def is_barotropic(self) -> bool:
        return not np.any(fluctuation(self).coef)

    # -- arithmetic ---------------------------------------------------------------
    def _combine(self, other: "VelocityField", sign: float) -> "VelocityField":
        if not isinstance(other, VelocityField):
            return NotImplemented
        if other.domain is not self.domain and other.domain.spec != self.domain.spec:
            raise ValueError("fields live on different domains")
        if other.family != self.family:
            raise ValueError("cannot combine fields from different vertical families")
        const = None
        if self.const is not None or other.const is not None:
            z = np.zeros((2,) + self.domain.shape[1:], dtype=complex)
            const = (self.const if self.const is not None else z) + sign * (
                other.const if other.const is not None else z
            )
        return VelocityField(self.domain, self.coef + sign * other.coef, const, self.family)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, a):
        if not np.isscalar(a):
            return NotImplemented
        const = None if self.const is None else a * self.const
        return VelocityField(self.domain, a * self.coef, const, self.family)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def with_coef(self, coef: np.ndarray) -> "VelocityField":
        return VelocityField(self.domain, coef, None, self.family)


@dataclass(frozen=True, eq=False)
class SurfaceField:
    """Field(s) on G.  ``coef`` has shape (..., ny, nx)."""

    domain: Domain
    coef: np.ndarray

    def __post_init__(self):
        coef = _as_complex(self.coef)
        if coef.shape[-2:] != self.domain.shape[1:]:
            raise ValueError(f"surface coefficients must end in {self.domain.shape[1:]}, got {coef.shape}")
        object.__setattr__(self, "coef", np.where(self.domain.horizontal_retained, coef, 0.0))

    @classmethod
    def from_grid(cls, domain: Domain, values: np.ndarray) -> "SurfaceField":
        return cls(domain, domain.to_spectral_2d(np.asarray(values, dtype=float)))

    @functools.cached_property
    def grid(self) -> np.ndarray:
        return self.domain.from_spectral_2d(self.coef)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coef) ** 2)))


@dataclass(frozen=True, eq=False)
class ScalarField3D:
    """Scalar on the collocation grid (nz, ny, nx), e.g. w(v) or div_H v."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.domain.shape:
            raise ValueError(f"scalar field must have shape {self.domain.shape}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("scalar field has non-finite entries")
        object.__setattr__(self, "values", vals)


def _check_primal(v: VelocityField, what: str):
    if v.family != "primal":
        raise ValueError(f"{what} expects a primal-family field")


def vertical_average(v: VelocityField) -> SurfaceField:
    """vbar = (1/h) int_{-h}^0 v dz, computed exactly from the basis means."""
    _check_primal(v, "vertical_average")
    beta = v.domain.basis.means
    c = np.einsum("i,ciyx->cyx", beta, v.coef)
    if v.const is not None:
        c = c + v.const
    return SurfaceField(v.domain, c)


def fluctuation(v: VelocityField) -> VelocityField:
    """v - vbar; has zero vertical average to round-off."""
    vbar = vertical_average(v)
    if v.domain.basis.kind is BasisKind.COSINE_NEUMANN:
        coef = v.coef.copy()
        coef[:, 0] = 0.0
        return VelocityField(v.domain, coef)
    const = (v.const if v.const is not None else 0.0) - vbar.coef
    return VelocityField(v.domain, v.coef, const)


def _div_coef(v: VelocityField) -> tuple:
    d = v.domain
    c = 1j * (d.xi_x * v.coef[0] + d.xi_y * v.coef[1])
    const = None
    if v.const is not None:
        const = 1j * (d.xi_x * v.const[0] + d.xi_y * v.const[1])
    return c, const


def vertical_velocity_at(v: VelocityField, z) -> np.ndarray:
    """w(v)(x, y, z) = -int_{-h}^z div_H v dxi at depths ``z``, shape (len(z), ny, nx).

    Uses closed-form antiderivatives of the basis functions, so w(-h) = 0
    exactly.
    """
    _check_primal(v, "vertical_velocity")
    d = v.domain
    z = np.atleast_1d(np.asarray(z, dtype=float))
    dc, dconst = _div_coef(v)
    anti = d.basis.antiderivatives(z) * d.basis.retained
    wc = -np.einsum("ji,iyx->jyx", anti, dc)
    if dconst is not None:
        wc = wc - (z + d.h)[:, None, None] * dconst[None]
    return d.from_spectral_2d(wc)


def vertical_velocity(v: VelocityField) -> ScalarField3D:
    """w(v) on the collocation nodes."""
    return ScalarField3D(v.domain, vertical_velocity_at(v, v.domain.z))


def grad_h(s: SurfaceField) -> SurfaceField:
    """Horizontal gradient of a scalar surface field -> component pair."""
    d = s.domain
    if s.coef.ndim != 2:
        raise ValueError("grad_h expects a scalar surface field")
    return SurfaceField(d, np.stack([1j * d.xi_x * s.coef, 1j * d.xi_y * s.coef]))


def div_h(v: VelocityField) -> ScalarField3D:
    """div_H v on the collocation nodes."""
    d = v.domain
    dc, dconst = _div_coef(v)
    if v.family == "primal":
        vals = d.from_spectral(dc)
    else:
        vals = d.evaluate(dc, d.z, family="dual")
    if dconst is not None:
        vals = vals + d.from_spectral_2d(dconst)[None]
    return ScalarField3D(d, vals)


def laplacian(v: VelocityField) -> VelocityField:
    """Delta v; diagonal on the basis, -(4 pi^2 |k|^2 + nu_m^2) per mode."""
    d = v.domain
    const = None if v.const is None else -d.xi_h2 * v.const
    return VelocityField(d, -d.symbol * v.coef, const, v.family)


def d_z(v: VelocityField) -> VelocityField:
    """Vertical derivative; maps the primal family to the dual one and back."""
    b = v.domain.basis
    fac = (b.derivative_signs(v.family) * b.wavenumbers)[:, None, None]
    fam = "dual" if v.family == "primal" else "primal"
    return VelocityField(v.domain, fac * v.coef, None, fam)


def d_x(v: VelocityField) -> VelocityField:
    d = v.domain
    const = None if v.const is None else 1j * d.xi_x * v.const
    return VelocityField(d, 1j * d.xi_x * v.coef, const, v.family)


def d_y(v: VelocityField) -> VelocityField:
    d = v.domain
    const = None if v.const is None else 1j * d.xi_y * v.const
    return VelocityField(d, 1j * d.xi_y * v.coef, const, v.family)


def _family_norms(v: VelocityField) -> np.ndarray:
    b = v.domain.basis
    n2 = b.norms2 if v.family == "primal" else b.dual_norms2
    return n2[:, None, None]


def inner(u: VelocityField, v: VelocityField) -> float:
    """Exact L^2(Omega) inner product via Parseval."""
    if u.family != v.family:
        raise ValueError("inner product of different families is not diagonal")
    d = u.domain
    total = np.sum((u.coef * np.conj(v.coef)).real * _family_norms(u))
    if u.const is not None or v.const is not None:
        h = d.h
        beta = d.basis.means[:, None, None]
        if u.const is not None:
            total += h * np.sum((u.const[:, None] * np.conj(v.coef) * beta).real)
        if v.const is not None:
            total += h * np.sum((np.conj(v.const)[:, None] * u.coef * beta).real)
        if u.const is not None and v.const is not None:
            total += h * np.sum((u.const * np.conj(v.const)).real)
    return float(total)


def l2_norm(v: VelocityField) -> float:
    return float(np.sqrt(max(inner(v, v), 0.0)))


def grad_norm2(v: VelocityField) -> float:
    """||grad v||^2_{L^2} for a primal field without z-independent part."""
    if v.const is not None:
        return l2_norm(d_x(v)) ** 2 + l2_norm(d_y(v)) ** 2 + l2_norm(d_z(v)) ** 2
    d = v.domain
    return float(np.sum(np.abs(v.coef) ** 2 * d.symbol * d.mode_weights))

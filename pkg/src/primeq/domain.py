"""Cylindrical domain G x (-h, 0), grids, vertical bases and transforms.

Horizontal directions are periodic on the unit square and handled with
complex FFTs.  The vertical direction uses a trigonometric basis chosen per
boundary-condition variant so that every basis function satisfies the
boundary conditions exactly and diagonalizes d^2/dz^2:

==========  ==================  =================================
variant     Dirichlet part      vertical basis (zeta = (z+h)/h)
==========  ==================  =================================
neumann     none                cos(m pi zeta),        m = 0..n-1
upper       z = 0               cos((m+1/2) pi zeta),  m = 0..n-1
bottom      z = -h              sin((m+1/2) pi zeta),  m = 0..n-1
dirichlet   z = 0 and z = -h    sin(m pi zeta),        m = 1..n
==========  ==================  =================================

Spectral coefficients ``c[..., i, ky, kx]`` represent

    u(x, y, z) = sum c[i, ky, kx] exp(2 pi i (kx x + ky y)) phi_i(z)

with unnormalized basis functions ``phi_i``.
"""
from __future__ import annotations

import enum
import functools
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

__all__ = [
    "BCVariant",
    "BasisKind",
    "VerticalBasis",
    "DomainSpec",
    "Domain",
    "make_domain",
    "fft_workers",
]


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by ``HYDRO_THREADS``."""
    raw = os.environ.get("HYDRO_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class BCVariant(str, enum.Enum):
    """Choice of the Dirichlet part of the top/bottom boundary."""

    NEUMANN = "neumann"
    UPPER = "upper"
    BOTTOM = "bottom"
    DIRICHLET = "dirichlet"

    @classmethod
    def parse(cls, name: "str | BCVariant") -> "BCVariant":
        if isinstance(name, BCVariant):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "neumann": cls.NEUMANN,
            "empty": cls.NEUMANN,
            "none": cls.NEUMANN,
            "upper": cls.UPPER,
            "top": cls.UPPER,
            "dirichlet_upper": cls.UPPER,
            "bottom": cls.BOTTOM,
            "dirichlet_bottom": cls.BOTTOM,
            "dirichlet": cls.DIRICHLET,
            "both": cls.DIRICHLET,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown boundary-condition variant {name!r}") from None

    @property
    def gamma_d(self) -> frozenset:
        return {
            BCVariant.NEUMANN: frozenset(),
            BCVariant.UPPER: frozenset({"upper"}),
            BCVariant.BOTTOM: frozenset({"bottom"}),
            BCVariant.DIRICHLET: frozenset({"upper", "bottom"}),
        }[self]

    @property
    def gamma_n(self) -> frozenset:
        return frozenset({"upper", "bottom"}) - self.gamma_d


class BasisKind(str, enum.Enum):
    COSINE_NEUMANN = "cosine"
    SINE_DIRICHLET = "sine"
    QUARTER_WAVE_COS = "quarter_cos"
    QUARTER_WAVE_SIN = "quarter_sin"


_KIND_FOR_BC = {
    BCVariant.NEUMANN: BasisKind.COSINE_NEUMANN,
    BCVariant.DIRICHLET: BasisKind.SINE_DIRICHLET,
    BCVariant.UPPER: BasisKind.QUARTER_WAVE_COS,
    BCVariant.BOTTOM: BasisKind.QUARTER_WAVE_SIN,
}


@dataclass(frozen=True)
class VerticalBasis:
    """Trigonometric basis on (-h, 0) adapted to one BC variant.

    ``family="primal"`` refers to the basis itself, ``family="dual"`` to the
    partner family that z-derivatives land in (cos <-> sin with the same
    frequencies).
    """

    kind: BasisKind
    nmodes: int
    h: float = 1.0

    @property
    def trig(self) -> str:
        return "cos" if self.kind in (BasisKind.COSINE_NEUMANN, BasisKind.QUARTER_WAVE_COS) else "sin"

    @property
    def shift(self) -> float:
        if self.kind in (BasisKind.QUARTER_WAVE_COS, BasisKind.QUARTER_WAVE_SIN):
            return 0.5
        return 0.0

    @functools.cached_property
    def modes(self) -> np.ndarray:
        """Integer mode labels m (sine modes start at 1)."""
        start = 1 if self.kind is BasisKind.SINE_DIRICHLET else 0
        return np.arange(start, start + self.nmodes)

    @functools.cached_property
    def wavenumbers(self) -> np.ndarray:
        """Vertical wavenumbers nu_i = (m + shift) pi / h."""
        return (self.modes + self.shift) * np.pi / self.h

    @functools.cached_property
    def eigenvalues(self) -> np.ndarray:
        """-d^2/dz^2 eigenvalues nu_i^2."""
        return self.wavenumbers**2

    @functools.cached_property
    def retained(self) -> np.ndarray:
        """Modes carried by the discrete space.

        The top sine mode sin(n pi zeta) is the vertical Nyquist mode on the
        half-offset nodes (it samples as (-1)^j) and is dropped.
        """
        keep = np.ones(self.nmodes, dtype=bool)
        if self.kind is BasisKind.SINE_DIRICHLET:
            keep[-1] = False
        return keep

    @functools.cached_property
    def norms2(self) -> np.ndarray:
        """L^2(-h, 0) norms squared of the primal basis functions."""
        out = np.full(self.nmodes, self.h / 2)
        if self.kind is BasisKind.COSINE_NEUMANN:
            out[0] = self.h
        return out

    @functools.cached_property
    def dual_norms2(self) -> np.ndarray:
        out = np.full(self.nmodes, self.h / 2)
        if self.kind is BasisKind.COSINE_NEUMANN:
            out[0] = 0.0
        return out

    @functools.cached_property
    def means(self) -> np.ndarray:
        """Vertical averages (1/h) int phi_i dz of the primal basis."""
        a = (self.modes + self.shift) * np.pi
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.trig == "cos":
                out = np.sin(a) / a
            else:
                out = (1.0 - np.cos(a)) / a
        if self.kind is BasisKind.COSINE_NEUMANN:
            out[0] = 1.0
            out[1:] = 0.0
        elif self.kind is BasisKind.SINE_DIRICHLET:
            out = np.where(self.modes % 2 == 1, 2.0 / a, 0.0)
        elif self.kind is BasisKind.QUARTER_WAVE_COS:
            out = (-1.0) ** self.modes / a
        return out

    # -- pointwise evaluation -------------------------------------------------
    def _zeta(self, z) -> np.ndarray:
        return (np.asarray(z, dtype=float) + self.h) / self.h

    def values(self, z, family: str = "primal") -> np.ndarray:
        """Matrix ``M[j, i] = phi_i(z_j)`` (or the dual family)."""
        arg = np.outer(self._zeta(z), (self.modes + self.shift) * np.pi)
        trig = self.trig if family == "primal" else ("sin" if self.trig == "cos" else "cos")
        return np.cos(arg) if trig == "cos" else np.sin(arg)

    def derivative_signs(self, family: str = "primal") -> np.ndarray:
        """``d/dz phi_i = sign * nu_i * partner_i``."""
        trig = self.trig if family == "primal" else ("sin" if self.trig == "cos" else "cos")
        return np.full(self.nmodes, -1.0 if trig == "cos" else 1.0)

    def derivatives(self, z, family: str = "primal") -> np.ndarray:
        other = "dual" if family == "primal" else "primal"
        return self.values(z, other) * (self.derivative_signs(family) * self.wavenumbers)

    def antiderivatives(self, z) -> np.ndarray:
        """Matrix ``M[j, i] = int_{-h}^{z_j} phi_i(xi) dxi`` in closed form."""
        zeta = self._zeta(z)
        a = (self.modes + self.shift) * np.pi
        arg = np.outer(zeta, a)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.trig == "cos":
                out = self.h * np.sin(arg) / a
            else:
                out = self.h * (1.0 - np.cos(arg)) / a
        if self.kind is BasisKind.COSINE_NEUMANN:
            out[:, 0] = self.h * zeta
        return out

    # -- fast transforms on the half-offset collocation nodes ----------------
    @functools.cached_property
    def nodes(self) -> np.ndarray:
        return -self.h + (np.arange(self.nmodes) + 0.5) * self.h / self.nmodes

    @functools.cached_property
    def _ortho_scale(self) -> np.ndarray:
        phi = self.values(self.nodes)
        return 1.0 / np.sqrt((phi**2).sum(axis=0))

    @property
    def _fast(self):
        typ = 4 if self.shift else 2
        if self.trig == "cos":
            return sfft.dct, sfft.idct, typ
        return sfft.dst, sfft.idst, typ

    def analyze(self, values: np.ndarray, axis: int = -3) -> np.ndarray:
        """Collocation values -> primal coefficients along ``axis``."""
        fwd, _, typ = self._fast
        out = fwd(values, type=typ, norm="ortho", axis=axis, workers=fft_workers())
        shape = [1] * out.ndim
        shape[axis] = self.nmodes
        return out * self._ortho_scale.reshape(shape)

    def synthesize(self, coef: np.ndarray, axis: int = -3) -> np.ndarray:
        """Primal coefficients -> collocation values along ``axis``."""
        _, inv, typ = self._fast
        shape = [1] * coef.ndim
        shape[axis] = self.nmodes
        return inv(coef / self._ortho_scale.reshape(shape), type=typ, norm="ortho", axis=axis,
                   workers=fft_workers())


@dataclass(frozen=True)
class DomainSpec:
    """Geometry and resolution.  The horizontal periods are fixed to 1."""

    h: float = 1.0
    nx: int = 16
    ny: int = 16
    nz: int = 16
    bc: BCVariant = BCVariant.NEUMANN

    def __post_init__(self):
        object.__setattr__(self, "bc", BCVariant.parse(self.bc))
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 4, got {n}")
        if int(self.nz) != self.nz or self.nz < 4:
            raise ValueError(f"nz must be an integer >= 4, got {self.nz}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"depth h must be positive, got {self.h}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "nz", int(self.nz))
        object.__setattr__(self, "h", float(self.h))

    @property
    def lx(self) -> float:
        return 1.0

    @property
    def ly(self) -> float:
        return 1.0

    @property
    def shape(self) -> tuple:
        return (self.nz, self.ny, self.nx)

    def to_dict(self) -> dict:
        return {"h": self.h, "nx": self.nx, "ny": self.ny, "nz": self.nz, "bc": self.bc.value}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        return cls(h=d.get("h", 1.0), nx=d["nx"], ny=d["ny"], nz=d["nz"], bc=d.get("bc", "neumann"))


def _dealias_cutoff(n: int) -> int:
    # quadratic products of |k| <= K alias outside |k| <= K iff n > 3K
    return (n - 1) // 3


@dataclass(frozen=True, eq=False)
class Domain:
    """Grids, wavenumbers, masks and transforms for one :class:`DomainSpec`.

    Immutable after construction; build through :func:`make_domain`.
    """

    spec: DomainSpec
    basis: VerticalBasis = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "basis", VerticalBasis(_KIND_FOR_BC[self.spec.bc], self.spec.nz, self.spec.h))

    # -- basic geometry --------------------------------------------------------
    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def bc(self) -> BCVariant:
        return self.spec.bc

    @property
    def shape(self) -> tuple:
        return self.spec.shape

    @functools.cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.spec.nx) / self.spec.nx

    @functools.cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.spec.ny) / self.spec.ny

    @property
    def z(self) -> np.ndarray:
        return self.basis.nodes

    @functools.cached_property
    def z_weights(self) -> np.ndarray:
        return np.full(self.spec.nz, self.h / self.spec.nz)

    @functools.cached_property
    def cell_volume(self) -> float:
        return self.h / (self.spec.nx * self.spec.ny * self.spec.nz)

    @functools.cached_property
    def mesh(self) -> tuple:
        """Broadcastable (z, y, x) coordinate arrays of shape (nz, ny, nx)."""
        z, y, x = np.meshgrid(self.z, self.y, self.x, indexing="ij")
        return z, y, x

    # -- wavenumbers -------------------------------------------------------------
    @functools.cached_property
    def kx(self) -> np.ndarray:
        return np.rint(sfft.fftfreq(self.spec.nx, 1.0 / self.spec.nx)).astype(int)[None, :]

    @functools.cached_property
    def ky(self) -> np.ndarray:
        return np.rint(sfft.fftfreq(self.spec.ny, 1.0 / self.spec.ny)).astype(int)[:, None]

    @functools.cached_property
    def xi_x(self) -> np.ndarray:
        return 2 * np.pi * self.kx.astype(float)

    @functools.cached_property
    def xi_y(self) -> np.ndarray:
        return 2 * np.pi * self.ky.astype(float)

    @functools.cached_property
    def xi_h2(self) -> np.ndarray:
        """|2 pi k|^2 on the (ny, nx) spectral plane."""
        return self.xi_x**2 + self.xi_y**2

    @functools.cached_property
    def symbol(self) -> np.ndarray:
        """-Laplacian symbol lambda(k, m) = 4 pi^2 |k|^2 + nu_m^2, shape (nz, ny, nx)."""
        return self.xi_h2[None] + self.basis.eigenvalues[:, None, None]

    @functools.cached_property
    def horizontal_retained(self) -> np.ndarray:
        """(ny, nx) mask dropping the Nyquist lines."""
        return (np.abs(self.kx) < self.spec.nx // 2) & (np.abs(self.ky) < self.spec.ny // 2)

    @functools.cached_property
    def horizontal_dealias(self) -> np.ndarray:
        """(ny, nx) 2/3-rule mask."""
        return (np.abs(self.kx) <= _dealias_cutoff(self.spec.nx)) & (
            np.abs(self.ky) <= _dealias_cutoff(self.spec.ny)
        )

    @functools.cached_property
    def retained(self) -> np.ndarray:
        """(nz, ny, nx) mask of the retained spectral modes."""
        return self.basis.retained[:, None, None] & self.horizontal_retained[None]

    @functools.cached_property
    def active(self) -> np.ndarray:
        """(nz, ny, nx) mask of the dealiased Galerkin space used for dynamics."""
        return self.retained & self.horizontal_dealias[None]

    @property
    def dealias_cutoff(self) -> tuple:
        return _dealias_cutoff(self.spec.nx), _dealias_cutoff(self.spec.ny)

    @functools.cached_property
    def mode_weights(self) -> np.ndarray:
        """Parseval weights: ||u||^2 = sum |c|^2 * mode_weights (area of G is 1)."""
        return np.broadcast_to(self.basis.norms2[:, None, None], self.shape)

    # -- transforms ------------------------------------------------------------------
    def _check(self, arr: np.ndarray, what: str):
        if arr.shape[-3:] != self.shape:
            raise ValueError(f"{what} has trailing shape {arr.shape[-3:]}, domain expects {self.shape}")

    def to_spectral(self, u: np.ndarray) -> np.ndarray:
        """Grid values (..., nz, ny, nx) -> retained spectral coefficients."""
        u = np.asarray(u)
        self._check(u, "field")
        c = sfft.fft2(u, axes=(-2, -1), norm="forward", workers=fft_workers())
        c = self.basis.analyze(c, axis=-3)
        return np.where(self.retained, c, 0.0)

    def from_spectral(self, c: np.ndarray) -> np.ndarray:
        """Spectral coefficients (..., nz, ny, nx) -> real grid values."""
        c = np.asarray(c)
        self._check(c, "coefficients")
        u = self.basis.synthesize(np.where(self.retained, c, 0.0), axis=-3)
        return sfft.ifft2(u, axes=(-2, -1), norm="forward", workers=fft_workers()).real

    def to_spectral_2d(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s)
        if s.shape[-2:] != self.shape[1:]:
            raise ValueError(f"surface field has shape {s.shape[-2:]}, expected {self.shape[1:]}")
        c = sfft.fft2(s, axes=(-2, -1), norm="forward", workers=fft_workers())
        return np.where(self.horizontal_retained, c, 0.0)

    def from_spectral_2d(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c)
        if c.shape[-2:] != self.shape[1:]:
            raise ValueError(f"surface coefficients have shape {c.shape[-2:]}, expected {self.shape[1:]}")
        return sfft.ifft2(np.where(self.horizontal_retained, c, 0.0), axes=(-2, -1), norm="forward",
                          workers=fft_workers()).real

    def evaluate(self, c: np.ndarray, z, family: str = "primal") -> np.ndarray:
        """Values of a spectral field at arbitrary depths ``z`` (grid in x, y)."""
        mat = self.basis.values(np.atleast_1d(z), family)
        cz = np.einsum("ji,...iyx->...jyx", mat, np.where(self.retained, c, 0.0))
        return sfft.ifft2(cz, axes=(-2, -1), norm="forward", workers=fft_workers()).real

    # -- Gauss-Legendre machinery for quadratic products ------------------------
    @functools.cached_property
    def quad_nodes(self) -> tuple:
        """Gauss-Legendre nodes/weights on (-h, 0), exact for the cubic trig
        integrands produced by the nonlinearity to round-off."""
        q = 3 * self.spec.nz + 24
        t, w = np.polynomial.legendre.leggauss(q)
        return self.h * (t - 1) / 2, self.h * w / 2

    @functools.cached_property
    def quad_matrices(self) -> dict:
        zq, wq = self.quad_nodes
        b = self.basis
        vals = b.values(zq)
        keep = b.retained.astype(float)
        return {
            "values": vals * keep,
            "dz": b.derivatives(zq) * keep,
            "anti": b.antiderivatives(zq) * keep,
            "dual": b.values(zq, "dual") * keep,
            # Galerkin L2 projection back onto the primal basis
            "project": (vals * wq[:, None] / b.norms2).T * keep[:, None],
            # weak-form z-derivative: <d_z g, phi_i> = -<g, phi_i'> when g phi_i
            # vanishes at both ends
            "project_dz": -(b.derivatives(zq) * wq[:, None] / b.norms2).T * keep[:, None],
        }

    @functools.cached_property
    def _band_columns(self) -> np.ndarray:
        return np.flatnonzero(self.horizontal_dealias.ravel())

    def _vertical_apply(self, mat: np.ndarray, c: np.ndarray, columns: np.ndarray | None = None) -> np.ndarray:
        """Apply ``mat`` along axis -3 with real BLAS products, optionally on a
        subset of horizontal columns (others are zero on input and output)."""
        ny, nx = c.shape[-2:]
        flat = c.reshape(c.shape[:-2] + (ny * nx,))
        if columns is not None:
            flat = flat[..., columns]
        if np.iscomplexobj(flat):
            out = np.matmul(mat, flat.real) + 1j * np.matmul(mat, flat.imag)
        else:
            out = np.matmul(mat, flat)
        if columns is not None:
            full = np.zeros(out.shape[:-1] + (ny * nx,), dtype=out.dtype)
            full[..., columns] = out
            out = full
        return out.reshape(out.shape[:-1] + (ny, nx))

    def to_quad(self, c: np.ndarray, which: str = "values", band: bool = True) -> np.ndarray:
        """Spectral coefficients -> physical values on the (Q, ny, nx) quadrature
        grid.  With ``band`` only the 2/3-band columns are read."""
        cols = self._band_columns if band else None
        cz = self._vertical_apply(self.quad_matrices[which], c, cols)
        return sfft.ifft2(cz, axes=(-2, -1), norm="forward", workers=fft_workers()).real

    def from_quad(self, g: np.ndarray, which: str = "project") -> np.ndarray:
        """Physical values on the quadrature grid -> projected coefficients on the
        active (dealiased) mode set."""
        gh = sfft.fft2(g, axes=(-2, -1), norm="forward", workers=fft_workers())
        c = self._vertical_apply(self.quad_matrices[which], gh, self._band_columns)
        return np.where(self.active, c, 0.0)

    def __repr__(self) -> str:
        s = self.spec
        return f"Domain(h={s.h}, {s.nx}x{s.ny}x{s.nz}, bc={s.bc.value})"


@functools.lru_cache(maxsize=32)
def make_domain(spec: DomainSpec) -> Domain:
    """Build (or fetch the cached) :class:`Domain` for ``spec``."""
    if not isinstance(spec, DomainSpec):
        raise TypeError("make_domain expects a DomainSpec")
    return Domain(spec)

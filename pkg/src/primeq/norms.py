"""Spatial norms: L^p by grid quadrature, H^{s,2} by multipliers, Besov B^s_{pq}
by a smooth dyadic partition of the mode magnitude |xi| = sqrt(lambda(k, m))."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .domain import fft_workers
from .fields import VelocityField
from .hydrostatic import galerkin

__all__ = [
    "NormSpec",
    "UnsupportedNormError",
    "norm",
    "lp_norm",
    "sobolev_norm",
    "besov_norm",
    "besov_blocks",
    "dyadic_partition",
    "grid_values",
]


class UnsupportedNormError(ValueError):
    """Raised for parameter combinations a norm family does not support."""


FAMILIES = ("lp", "sobolev", "besov", "time_weighted")


@dataclass(frozen=True)
class NormSpec:
    """Selects a norm: family in {lp, sobolev, besov, time_weighted}.

    ``of`` names the trajectory quantity for time-weighted norms
    ("Av", "v_t" or "v").
    """

    family: str = "lp"
    p: float = 2.0
    q: float = 2.0
    s: float = 0.0
    mu: float = 1.0
    of: str = "Av"

    def __post_init__(self):
        fam = self.family.lower().replace("-", "_")
        aliases = {"l": "lp", "lp": "lp", "sobolev": "sobolev", "h": "sobolev", "besov": "besov",
                   "b": "besov", "time_weighted": "time_weighted", "tw": "time_weighted"}
        if fam not in aliases:
            raise ValueError(f"unknown norm family {self.family!r}")
        object.__setattr__(self, "family", aliases[fam])
        if not 1 < self.p < math.inf:
            raise ValueError("p must lie in (1, inf)")
        if not 1 < self.q < math.inf:
            raise ValueError("q must lie in (1, inf)")
        if self.s < 0:
            raise ValueError("s must be >= 0")
        if self.family == "time_weighted" and not (1.0 / self.q < self.mu <= 1.0):
            raise ValueError("mu must lie in (1/q, 1]")
        if self.family == "sobolev" and self.p != 2:
            raise UnsupportedNormError("Sobolev norms are implemented for p = 2 only")

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        """Parse ``family[:key=value,...]``, e.g. ``besov:s=0.5,p=4,q=4``."""
        fam, _, rest = text.partition(":")
        kw = {}
        for item in filter(None, (t.strip() for t in rest.split(","))):
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in ("p", "q", "s", "mu", "of"):
                raise ValueError(f"unknown norm parameter {key!r}")
            kw[key] = val.strip() if key == "of" else float(val)
        return cls(fam.strip(), **kw)

    @property
    def label(self) -> str:
        if self.family == "lp":
            return f"L{self.p:g}"
        if self.family == "sobolev":
            return f"H{self.s:g}"
        if self.family == "besov":
            return f"B{self.s:g}_{self.p:g}{self.q:g}"
        return f"TW_{self.of}_mu{self.mu:g}_q{self.q:g}"


def grid_values(v: VelocityField, refine: int = 2) -> tuple:
    """Values of v on a grid refined ``refine`` times in every direction.

    Returns (values (2, rz, ry, rx), cell volume).  Horizontal refinement is
    exact trigonometric interpolation; vertical uses the basis functions at
    half-offset nodes.
    """
    d = v.domain
    nz, ny, nx = d.shape
    rz, ry, rx = refine * nz, refine * ny, refine * nx
    b = d.basis
    zr = -d.h + (np.arange(rz) + 0.5) * d.h / rz
    fam = v.family
    mat = b.values(zr, fam) * b.retained
    cz = np.einsum("ji,ciyx->cjyx", mat, v.coef)
    big = np.zeros((2, rz, ry, rx), dtype=complex)
    ky = d.ky[:, 0]
    kx = d.kx[0]
    big[np.ix_([0, 1], np.arange(rz), ky % ry, kx % rx)] = cz
    vals = sfft.ifft2(big, axes=(-2, -1), norm="forward", workers=fft_workers()).real
    if v.const is not None:
        cb = np.zeros((2, ry, rx), dtype=complex)
        cb[np.ix_([0, 1], ky % ry, kx % rx)] = v.const
        vals = vals + sfft.ifft2(cb, axes=(-2, -1), norm="forward").real[:, None]
    return vals, d.h / (rz * ry * rx)


def lp_norm(v: VelocityField, p: float, refine: int = 2) -> float:
    """(int |v|^p)^{1/p} with |v| the Euclidean length of (v1, v2)."""
    vals, vol = grid_values(v, refine)
    mag = np.sqrt(vals[0] ** 2 + vals[1] ** 2)
    return float((np.sum(mag**p) * vol) ** (1.0 / p))


def sobolev_norm(v: VelocityField, s: float, p: float = 2.0) -> float:
    """H^{s,2} norm, multiplier (1 + lambda(k, m))^{s/2}."""
    if p != 2:
        raise UnsupportedNormError("Sobolev norms are implemented for p = 2 only")
    v = galerkin(v)
    d = v.domain
    return float(np.sqrt(np.sum(np.abs(v.coef) ** 2 * (1.0 + d.symbol) ** s * d.mode_weights)))


def _chi(r: np.ndarray) -> np.ndarray:
    """Smooth cutoff: 1 on [0, 1], 0 on [2, inf)."""
    r = np.asarray(r, dtype=float)
    a = np.clip(2.0 - r, 0.0, None)
    b = np.clip(r - 1.0, 0.0, None)
    with np.errstate(divide="ignore", over="ignore"):
        ga = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
        gb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
    return ga / (ga + gb)


def dyadic_partition(r: np.ndarray, nblocks: int) -> np.ndarray:
    """Weights psi_j(r), j = 0..nblocks-1, summing to 1 for r below 2^nblocks.

    psi_0 = chi(r/2) collects |xi| <= 2; psi_j = chi(r/2^{j+1}) - chi(r/2^j).
    """
    out = [_chi(r / 2.0)]
    for j in range(1, nblocks):
        out.append(_chi(r / 2.0 ** (j + 1)) - _chi(r / 2.0**j))
    return np.stack(out)


def _nblocks(v: VelocityField) -> int:
    rmax = float(np.sqrt(v.domain.symbol[v.domain.retained].max()))
    return max(1, int(math.ceil(math.log2(max(rmax, 2.0)))))


def besov_blocks(v: VelocityField, p: float, refine: int = 2) -> np.ndarray:
    """||Delta_j v||_{L^p} for every dyadic block j."""
    v = galerkin(v)
    d = v.domain
    nb = _nblocks(v)
    if nb < 3:
        raise UnsupportedNormError("Besov norm needs at least 3 dyadic blocks at this resolution")
    psi = dyadic_partition(np.sqrt(d.symbol), nb)
    out = np.empty(nb)
    for j in range(nb):
        blk = VelocityField(d, v.coef * psi[j])
        if p == 2:
            out[j] = np.sqrt(np.sum(np.abs(blk.coef) ** 2 * d.mode_weights))
        else:
            out[j] = lp_norm(blk, p, refine)
    return out


def besov_norm(v: VelocityField, s: float, p: float, q: float, refine: int = 2) -> float:
    """l^q over blocks of 2^{js} ||Delta_j v||_{L^p}."""
    blocks = besov_blocks(v, p, refine)
    w = 2.0 ** (s * np.arange(blocks.size)) * blocks
    return float(np.sum(w**q) ** (1.0 / q))


def norm(v: VelocityField, spec: NormSpec, refine: int = 2) -> float:
    """Evaluate a spatial norm of v."""
    if spec.family == "lp":
        return lp_norm(v, spec.p, refine)
    if spec.family == "sobolev":
        return sobolev_norm(v, spec.s, spec.p)
    if spec.family == "besov":
        return besov_norm(v, spec.s, spec.p, spec.q, refine)
    raise UnsupportedNormError("time-weighted norms need a trajectory; use analysis.time_weighted_norm")

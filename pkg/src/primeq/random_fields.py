"""Seeded random velocity fields that nest across resolutions.

Noise is drawn once per seed on a fixed canonical box of wavenumbers
(|k_x|, |k_y| <= 32, 64 vertical modes) and restricted to whatever mode set
a domain carries, so the same seed on 8^3, 16^3 and 32^3 gives successive
truncations of one field.
"""
from __future__ import annotations

import functools

import numpy as np

from .domain import Domain
from .fields import VelocityField

__all__ = ["CANON_K", "CANON_M", "canonical_noise", "random_field", "power_decay"]

CANON_K = 32
CANON_M = 64


@functools.lru_cache(maxsize=16)
def canonical_noise(seed: int, phase_only: bool = False) -> np.ndarray:
    """Hermitian-symmetric complex Gaussian noise of shape (2, M, 2K+1, 2K+1)."""
    rng = np.random.default_rng(int(seed))
    n = 2 * CANON_K + 1
    shape = (2, CANON_M, n, n)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    z = (z + np.conj(z[:, :, ::-1, ::-1])) / 2.0
    if phase_only:
        mag = np.abs(z)
        z = np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 1.0)
    z.setflags(write=False)
    return z


def _restrict(domain: Domain, noise: np.ndarray) -> np.ndarray:
    nz = domain.shape[0]
    kmax = max(int(np.abs(domain.kx).max()), int(np.abs(domain.ky).max()))
    if nz > CANON_M or kmax > CANON_K:
        raise ValueError(f"resolution exceeds the canonical noise box ({CANON_M} vertical modes, |k| <= {CANON_K})")
    iy = (domain.ky + CANON_K)[:, 0]
    ix = (domain.kx + CANON_K)[0]
    return noise[:, :nz][:, :, iy][:, :, :, ix]


def power_decay(gamma: float):
    """Amplitude law (1 + lambda)^(-gamma)."""
    return lambda lam: (1.0 + lam) ** (-gamma)


def random_field(domain: Domain, seed: int, amplitude=None, *, phase_only: bool = False,
                 solenoidal: bool = True) -> VelocityField:
    """Random field on the active mode set with per-mode magnitude ``amplitude(lambda)``."""
    from .hydrostatic import project

    noise = _restrict(domain, canonical_noise(int(seed), phase_only))
    amp = 1.0 if amplitude is None else amplitude(domain.symbol)
    coef = np.where(domain.active, noise * amp, 0.0)
    v = VelocityField(domain, coef)
    return project(v) if solenoidal else v

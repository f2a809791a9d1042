"""Diagnostics on fields and trajectories.

Rough initial data, time-weighted norms, the a priori ledger (Steps 1-7
quantities), the barotropic/baroclinic split residual, smoothing and
analyticity trackers, energy closure and semigroup decay rates.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .domain import Domain, DomainSpec, fft_workers, make_domain
from .fields import (VelocityField, d_x, d_y, d_z, fluctuation, grad_norm2, l2_norm,
                     vertical_average)
from .hydrostatic import apply_semigroup, galerkin, recover_surface_pressure
from .nonlinear import quad_fields
from .norms import (NormSpec, UnsupportedNormError, besov_norm, grid_values, lp_norm, norm)
from .random_fields import random_field
from .stepper import (Forcing, TrajectoryRecord, _stokes_coef, pressure_residual,
                      time_derivative, time_derivative_record)

__all__ = [
    "NormSpec",
    "norm",
    "RoughDataWarning",
    "rough_exponent",
    "generate_rough_data",
    "time_weighted_norm",
    "AprioriLedger",
    "apriori_ledger",
    "SplitResidual",
    "split_residual",
    "split_terms",
    "SmoothingReport",
    "smoothing_tracker",
    "RadiusFit",
    "fit_analyticity_radius",
    "analyticity_radius",
    "energy_closure",
    "stokes_norm",
    "decay_rate",
]


class RoughDataWarning(UserWarning):
    """theta sits at a threshold where the boundary-trace description changes."""


def stokes_norm(v: VelocityField) -> float:
    """||A v||_{L^2}."""
    v = galerkin(v)
    d = v.domain
    return math.sqrt(float(np.sum(np.abs(_stokes_coef(d, v.coef)) ** 2 * d.mode_weights)))


# -- rough data ---------------------------------------------------------------------


def rough_exponent(theta: float, eps: float = 0.05) -> float:
    return theta + 0.75 + eps / 2


def generate_rough_data(domain: Domain, p: float, q: float, theta: float, seed: int, *,
                        eps: float = 0.05, normalize_at: int | None = None) -> VelocityField:
    """Random-phase solenoidal data with |coef| ~ (1 + lambda)^{-(theta + 3/4 + eps/2)}.

    Scaled so that the B^{2 theta}_{pq} estimator equals 1, evaluated on the
    domain itself or, with ``normalize_at``, on an n^3 domain of the same
    depth and variant (so that different resolutions share one scale factor).
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if not (p > 1 and q > 1):
        raise ValueError("p and q must exceed 1")
    for thr in (1 / (2 * p), 0.5 + 1 / (2 * p)):
        if math.isclose(theta, thr, rel_tol=1e-9, abs_tol=1e-12):
            warnings.warn(f"theta = {theta:g} is a trace threshold (1/(2p) or 1/2 + 1/(2p))",
                          RoughDataWarning, stacklevel=2)
    gamma = rough_exponent(theta, eps)

    def amp(lam):
        return (1.0 + lam) ** (-gamma)

    v = random_field(domain, seed, amp, phase_only=True)
    ref = v
    if normalize_at is not None:
        s = domain.spec
        rd = make_domain(DomainSpec(h=s.h, nx=normalize_at, ny=normalize_at, nz=normalize_at, bc=s.bc))
        ref = random_field(rd, seed, amp, phase_only=True)
    scale = besov_norm(ref, 2 * theta, p, q)
    return v if scale == 0 else (1.0 / scale) * v


# -- time-weighted norms ------------------------------------------------------------


def _trapz_cum(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    if t.size == 0:
        return np.zeros(0)
    return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))])


def time_weighted_norm(rec: TrajectoryRecord, spec: NormSpec) -> float:
    """(int_0^T t^{(1-mu) q} ||X(t)||^q dt)^{1/q} by trapezoid on snapshot times.

    X is A v, v_t or v per ``spec.of``.
    """
    if spec.family != "time_weighted":
        raise UnsupportedNormError("expected a time-weighted NormSpec")
    key = {"Av": "Av_norm", "v_t": "vt_norm", "vt": "vt_norm", "v": None}.get(spec.of, "missing")
    if key == "missing":
        raise ValueError(f"unknown trajectory quantity {spec.of!r}")
    t = rec.times
    if key is None:
        x = np.sqrt(rec.series("energy"))
    else:
        x = rec.series(key)
    y = t ** ((1 - spec.mu) * spec.q) * x**spec.q
    return float(_trapz_cum(t, y)[-1] ** (1 / spec.q)) if t.size else 0.0


# -- a priori ledger ----------------------------------------------------------------

LEDGER_QUANTITIES = (
    "step1_vtilde_L4",
    "step1_int_vtilde_grad_vtilde",
    "step2_grad_vbar",
    "step2_int_grad_pressure",
    "step3_vz_L2",
    "step3_int_grad_vz",
    "step4_grad_v",
    "step4_int_lap_v",
    "step5_vt_L2",
    "step6_vz_L3",
    "step7_hess_v",
)


@dataclass
class AprioriLedger:
    times: np.ndarray
    values: dict
    running_max: dict
    bound: float
    flags: list = field(default_factory=list)

    @property
    def finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.values.values())

    def rows(self) -> list:
        """(time, name, value) rows."""
        return [(float(t), k, float(v[i])) for k, v in self.values.items() for i, t in enumerate(self.times)]

    def summary_json(self) -> str:
        return json.dumps({"running_max": {k: float(v[-1]) if len(v) else 0.0 for k, v in self.running_max.items()},
                           "bound": self.bound, "flags": self.flags}, sort_keys=True)


def _vtilde_grad_product(vt: VelocityField) -> float:
    """|| |v~| |grad v~| ||_{L^2}^2 by quadrature on a refined grid."""
    vals, vol = grid_values(vt)
    g2 = 0.0
    for dv in (d_x(vt), d_y(vt), d_z(vt)):
        gv, _ = grid_values(dv)
        g2 = g2 + np.sum(gv**2, axis=0)
    return float(np.sum(np.sum(vals**2, axis=0) * g2) * vol)


def apriori_ledger(rec: TrajectoryRecord) -> AprioriLedger:
    """Steps 1-7 quantities per snapshot, time integrals and running maxima."""
    d = rec.domain
    f = rec.forcing
    flags = []
    if rec.blowup is not None:
        flags.append(f"blowup at t={rec.blowup:g}")
    step5 = f.has_derivative
    if not step5:
        flags.append("step 5 omitted: forcing time derivative unavailable")
    cols = {k: [] for k in LEDGER_QUANTITIES}
    integrands = {k: [] for k in ("step1_int_vtilde_grad_vtilde", "step2_int_grad_pressure",
                                  "step3_int_grad_vz", "step4_int_lap_v")}
    lam = d.symbol
    nu2 = d.basis.eigenvalues[:, None, None]
    w = d.mode_weights
    for snap in rec.snapshots:
        v = VelocityField(d, snap.coef)
        c = v.coef
        vt_field = fluctuation(v)
        vbar = vertical_average(v).coef
        cols["step1_vtilde_L4"].append(lp_norm(vt_field, 4))
        integrands["step1_int_vtilde_grad_vtilde"].append(_vtilde_grad_product(vt_field))
        cols["step2_grad_vbar"].append(math.sqrt(float(np.sum(d.xi_h2 * np.abs(vbar) ** 2))))
        if snap.pressure is not None:
            pi = snap.pressure
        else:
            pi = recover_surface_pressure(pressure_residual(v, snap.t, f, rec.nonlinear)).coef
        integrands["step2_int_grad_pressure"].append(float(np.sum(d.xi_h2 * np.abs(pi) ** 2)))
        vz = d_z(v)
        cols["step3_vz_L2"].append(l2_norm(vz))
        integrands["step3_int_grad_vz"].append(float(np.sum(np.abs(c) ** 2 * nu2 * lam * w)))
        cols["step4_grad_v"].append(math.sqrt(grad_norm2(v)))
        lap2 = float(np.sum(np.abs(c) ** 2 * lam**2 * w))
        integrands["step4_int_lap_v"].append(lap2)
        cols["step5_vt_L2"].append(l2_norm(time_derivative(v, snap.t, f, rec.nonlinear)) if step5 else np.nan)
        cols["step6_vz_L3"].append(lp_norm(vz, 3))
        cols["step7_hess_v"].append(math.sqrt(lap2))
    t = rec.times
    for k, y in integrands.items():
        cols[k] = list(_trapz_cum(t, np.array(y)))
    values = {k: np.array(v, dtype=float) for k, v in cols.items()}
    if not step5:
        values.pop("step5_vt_L2")
    running = {k: np.maximum.accumulate(np.nan_to_num(v, nan=np.inf)) if v.size else v for k, v in values.items()}
    finals = [r[-1] for r in running.values() if r.size]
    bound = float(max(finals)) if finals else 0.0
    if not all(np.all(np.isfinite(v)) for v in values.values()):
        flags.append("non-finite ledger entry")
    return AprioriLedger(t, values, running, bound, flags)


# -- split system -------------------------------------------------------------------


@dataclass
class SplitResidual:
    times: np.ndarray
    vbar: np.ndarray
    vtilde: np.ndarray
    scale: np.ndarray


def _band_2d(d: Domain, grid2d: np.ndarray) -> np.ndarray:
    c = sfft.fft2(grid2d, axes=(-2, -1), norm="forward", workers=fft_workers())
    return np.where(d.horizontal_dealias, c, 0.0)


def split_terms(v: VelocityField, v_t: VelocityField, t: float, forcing: Forcing | None = None,
                nonlinear: bool = True) -> tuple:
    """Residuals of the vertical-mean and fluctuation equations at one time.

    Returns (rbar (2, ny, nx) Fourier coefficients, rtilde VelocityField).
    The surface pressure is recovered from the full equation at (v, v_t).
    Both include the boundary-flux term (1/h)[d_z v]_{-h}^0, which vanishes
    when neither end is Dirichlet.
    """
    d = v.domain
    b = d.basis
    v = galerkin(v)
    v_t = galerkin(v_t)
    pi = recover_surface_pressure(pressure_residual(v, t, forcing, nonlinear, v_t)).coef
    vbar = vertical_average(v).coef
    vtil = fluctuation(v)
    ends = b.derivatives(np.array([0.0, -d.h])) * b.retained
    flux = np.einsum("i,ciyx->cyx", ends[0] - ends[1], v.coef) / d.h
    zero2 = np.zeros((2,) + d.shape[1:], dtype=complex)

    adv_bar = zero2
    mean_tt = zero2
    adv_til = np.zeros_like(v.coef)
    if nonlinear:
        ub = sfft.ifft2(vbar, axes=(-2, -1), norm="forward").real
        gbx = sfft.ifft2(1j * d.xi_x * vbar, axes=(-2, -1), norm="forward").real
        gby = sfft.ifft2(1j * d.xi_y * vbar, axes=(-2, -1), norm="forward").real
        adv_bar = _band_2d(d, ub[0] * gbx + ub[1] * gby)
        qt = quad_fields(vtil)
        _, wq = d.quad_nodes
        divt = qt.dx[0] + qt.dy[1]
        integrand = qt.u[0][None] * qt.dx + qt.u[1][None] * qt.dy + divt[None] * qt.u
        mean_tt = _band_2d(d, np.einsum("q,cqyx->cyx", wq, integrand) / d.h)
        w = quad_fields(v).w
        g = (qt.u[0][None] * qt.dx + qt.u[1][None] * qt.dy + w[None] * qt.dz
             + ub[0] * qt.dx + ub[1] * qt.dy
             + qt.u[0][None] * gbx[:, None] + qt.u[1][None] * gby[:, None])
        adv_til = d.from_quad(g, "project")

    fbar = zero2
    ftil = VelocityField.zeros(d)
    if forcing is not None and not forcing.is_zero:
        fv = galerkin(forcing(t, d))
        fbar = vertical_average(fv).coef
        ftil = fluctuation(fv)

    vt_bar = vertical_average(v_t).coef
    rbar = (vt_bar + d.xi_h2 * vbar - flux + np.stack([1j * d.xi_x * pi, 1j * d.xi_y * pi])
            + adv_bar + mean_tt - fbar)
    rbar = np.where(d.horizontal_retained, rbar, 0.0)

    vt_til = fluctuation(v_t)
    lap_til = -d.symbol * vtil.coef
    const = (0.0 if vt_til.const is None else vt_til.const)
    const = const + (0.0 if vtil.const is None else d.xi_h2 * vtil.const)
    const = const - mean_tt + flux
    coef = vt_til.coef - lap_til + adv_til - ftil.coef
    if ftil.const is not None:
        const = const - ftil.const
    rtil = VelocityField(d, coef, np.broadcast_to(const, zero2.shape))
    return rbar, rtil


def split_residual(rec: TrajectoryRecord) -> SplitResidual:
    """Residual norms of both equations at snapshot midpoints t + dt/2.

    v and v_t are the midpoint average and difference quotient of the
    recorded step pair, so the residual measures the O(dt^2) defect of the
    discrete solution in the continuous equations.
    """
    d = rec.domain
    ts, rb, rt, sc = [], [], [], []
    for snap in rec.snapshots:
        if snap.coef_next is None:
            continue
        v = VelocityField(d, 0.5 * (snap.coef + snap.coef_next))
        vt = VelocityField(d, (snap.coef_next - snap.coef) / snap.dt)
        tm = snap.t + 0.5 * snap.dt
        rbar, rtil = split_terms(v, vt, tm, rec.forcing, rec.nonlinear)
        ts.append(tm)
        rb.append(math.sqrt(float(np.sum(np.abs(rbar) ** 2))))
        rt.append(l2_norm(rtil))
        sc.append(l2_norm(vt))
    return SplitResidual(np.array(ts), np.array(rb), np.array(rt), np.array(sc))


# -- smoothing ----------------------------------------------------------------------


@dataclass
class SmoothingReport:
    times: np.ndarray
    Av_norm: np.ndarray
    weighted_Av: np.ndarray
    t_vt: np.ndarray
    sup_weighted_Av: float
    sup_t_vt: float
    Av_initial: float
    bounded: bool


def smoothing_tracker(rec: TrajectoryRecord, mu: float | None = None, p: float | None = None,
                      q: float | None = None) -> SmoothingReport:
    """sup over snapshot times t > 0 of t^{1-mu} ||A v(t)|| and t ||v_t(t)||.

    ``p`` and ``q`` are accepted for the record of the data class; the
    trackers themselves are L^2 based.
    """
    mu = rec.mu if mu is None else mu
    t = rec.times
    av = rec.series("Av_norm")
    pos = t > 0
    weighted = t[pos] ** (1 - mu) * av[pos]
    tv = time_derivative_record(rec)
    tvt = tv.t_vt_norm[pos]
    bounded = bool(np.all(np.isfinite(weighted)) and np.all(np.isfinite(tvt)) and tv.bounded)
    return SmoothingReport(t[pos], av[pos], weighted, tvt,
                           float(weighted.max()) if weighted.size else 0.0,
                           float(tvt.max()) if tvt.size else 0.0, float(av[0]) if av.size else 0.0, bounded)


# -- analyticity ----------------------------------------------------------------------


@dataclass
class RadiusFit:
    sigma: float
    intercept: float
    modes_used: int
    flagged: bool


def fit_analyticity_radius(v: VelocityField, floor: float = 1e-13, min_modes: int = 6) -> RadiusFit:
    """Least-squares fit log|v_hat| ~ a - sigma (|2 pi k| + nu_m) over modes above
    ``floor`` times the largest coefficient."""
    v = galerkin(v)
    d = v.domain
    mag = np.abs(v.coef)
    r = np.sqrt(d.xi_h2)[None] + d.basis.wavenumbers[:, None, None]
    r = np.broadcast_to(r, mag.shape[1:])
    top = mag.max()
    if top == 0:
        return RadiusFit(float("nan"), float("nan"), 0, True)
    sel = (mag > floor * top) & d.retained[None]
    x = np.broadcast_to(r, mag.shape)[sel]
    y = np.log(mag[sel])
    if x.size < min_modes or np.unique(np.round(x, 9)).size < 3:
        return RadiusFit(float("nan"), float("nan"), int(x.size), True)
    a = np.column_stack([np.ones_like(x), -x])
    (c0, sigma), *_ = np.linalg.lstsq(a, y, rcond=None)
    return RadiusFit(float(sigma), float(c0), int(x.size), False)


def analyticity_radius(rec_or_fields, floor: float = 1e-13) -> tuple:
    """Per-snapshot sigma(t); returns (times, sigma, flagged)."""
    if isinstance(rec_or_fields, TrajectoryRecord):
        times = rec_or_fields.times
        fields = [rec_or_fields.field(i) for i in range(len(times))]
    else:
        times, fields = zip(*rec_or_fields)
        times = np.asarray(times)
    fits = [fit_analyticity_radius(f, floor) for f in fields]
    return np.asarray(times), np.array([f.sigma for f in fits]), np.array([f.flagged for f in fits])


# -- energy and decay -----------------------------------------------------------------


def energy_closure(rec: TrajectoryRecord) -> np.ndarray:
    """||v(t)||^2 + 2 int ||grad v||^2 - 2 int <f, v> - ||v0||^2 at snapshot times."""
    return rec.series("energy_residual")


def decay_rate(v0: VelocityField, t1: float = 1.0, t2: float = 2.0) -> float:
    """-(d/dt) log ||e^{tA} v0|| measured between t1 and t2."""
    a = l2_norm(apply_semigroup(v0, t1))
    b = l2_norm(apply_semigroup(v0, t2))
    return math.log(a / b) / (t2 - t1)

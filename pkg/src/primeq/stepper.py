"""Crank-Nicolson / Adams-Bashforth time integration and trajectory recording.

Each step solves

    (I - dt/2 A) v^{n+1} = (I + dt/2 A) v^n + dt G^{n+1/2},
    G = -F(v) + P f,

exactly per mode on the solenoidal subspace.  G^{n+1/2} is the AB2
extrapolation 3/2 G^n - 1/2 G^{n-1}; the first step (and any step after a
change of dt) uses a Heun predictor-corrector for G instead, which keeps the
scheme second order from the start.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .domain import Domain, DomainSpec, make_domain
from .fields import VelocityField, grad_norm2, inner, l2_norm
from .hydrostatic import galerkin, project, recover_surface_pressure, stokes_operator
from .nonlinear import advect, advection_raw
from .norms import NormSpec, norm

__all__ = [
    "BlowupError",
    "MissingForcingDerivativeError",
    "Forcing",
    "RunConfig",
    "State",
    "Snapshot",
    "TrajectoryRecord",
    "TimeDerivativeReport",
    "Stepper",
    "initial_field",
    "snapshot_steps",
    "run",
    "time_derivative",
    "time_derivative_record",
    "pressure_residual",
]

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e12


class BlowupError(RuntimeError):
    def __init__(self, t: float, reason: str):
        super().__init__(f"blowup at t={t:.6g}: {reason}")
        self.t = t


class MissingForcingDerivativeError(ValueError):
    """A diagnostic needs d f/dt but the forcing does not provide it."""


# -- forcing ------------------------------------------------------------------------


@dataclass
class Forcing:
    """Body force f(t) with optional time derivative.

    ``func(t)`` and ``dfunc(t)`` return VelocityFields (possibly with a
    z-independent part).  ``func=None`` is the zero force.
    """

    kind: str = "zero"
    func: Callable | None = None
    dfunc: Callable | None = None
    pressure: Callable | None = None

    @property
    def is_zero(self) -> bool:
        return self.func is None

    @property
    def has_derivative(self) -> bool:
        return self.func is None or self.dfunc is not None

    def __call__(self, t: float, domain: Domain) -> VelocityField:
        if self.func is None:
            return VelocityField.zeros(domain)
        return self.func(t)

    def derivative(self, t: float, domain: Domain) -> VelocityField:
        if self.func is None:
            return VelocityField.zeros(domain)
        if self.dfunc is None:
            raise MissingForcingDerivativeError(f"forcing {self.kind!r} has no time derivative")
        return self.dfunc(t)

    @classmethod
    def zero(cls) -> "Forcing":
        return cls()

    @classmethod
    def steady(cls, f: VelocityField, kind: str = "steady") -> "Forcing":
        zero = VelocityField.zeros(f.domain)
        return cls(kind, lambda t: f, lambda t: zero)

    @classmethod
    def manufactured_stokes(cls, v_exact: VelocityField, pressure_hat: np.ndarray) -> "Forcing":
        """f = -Delta v_e + grad_H pi for a steady linear Stokes solution (v_e, pi).

        ``pressure_hat`` are the surface-pressure Fourier coefficients (ny, nx).
        """
        d = v_exact.domain
        lap = -d.symbol * galerkin(v_exact).coef
        grad = np.stack([1j * d.xi_x * pressure_hat, 1j * d.xi_y * pressure_hat])
        f = VelocityField(d, -lap, grad)
        out = cls.steady(f, "manufactured_stokes")
        out.pressure = lambda t: pressure_hat
        return out

    @classmethod
    def kolmogorov(cls, domain: Domain, amplitude: float = 1.0, k: int = 1) -> "Forcing":
        """z-independent shear forcing f = a (sin 2 pi k y, 0)."""
        def shape(x, y, z):
            return amplitude * np.sin(2 * np.pi * k * y), 0.0 * x

        z, y, x = domain.mesh
        grid = np.stack([np.broadcast_to(g, z.shape) for g in shape(x, y, z)])[:, 0]
        const = domain.to_spectral_2d(grid)
        f = VelocityField(domain, np.zeros((2,) + domain.shape), const)
        return cls.steady(f, "kolmogorov")

    @classmethod
    def file_series(cls, paths: list, domain: Domain) -> "Forcing":
        """Piecewise-linear interpolation between forcing snapshots (by header time)."""
        from .io import read_snapshot

        items = []
        for p in paths:
            header, values = read_snapshot(p)
            if header.spec != domain.spec:
                raise ValueError(f"forcing snapshot {p} does not match the run domain")
            items.append((header.time, VelocityField.from_grid(domain, values)))
        items.sort(key=lambda it: it[0])
        times = np.array([t for t, _ in items])
        if len(items) == 1:
            return cls.steady(items[0][1], "file")
        if np.any(np.diff(times) <= 0):
            raise ValueError("forcing snapshot times must be distinct")

        def locate(t):
            i = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
            return i, (t - times[i]) / (times[i + 1] - times[i])

        def func(t):
            i, a = locate(t)
            a = min(max(a, 0.0), 1.0)
            return (1 - a) * items[i][1] + a * items[i + 1][1]

        def dfunc(t):
            i, _ = locate(t)
            return (1.0 / (times[i + 1] - times[i])) * (items[i + 1][1] - items[i][1])

        return cls("file", func, dfunc)


# -- configuration ------------------------------------------------------------------


@dataclass
class RunConfig:
    """Everything needed for one run.  Flat keys mirror the config file."""

    spec: DomainSpec = field(default_factory=DomainSpec)
    initial: str = "taylor_green"
    amplitude: float = 1.0
    seed: int = 0
    theta: float = 0.25
    forcing: str = "zero"
    forcing_amplitude: float = 1.0
    forcing_files: tuple = ()
    dt: float = 1e-3
    t_end: float = 0.1
    snapshot_stride: int = 0
    snapshot_count: int = 12
    snapshot_ratio: float = 0.7
    norms: tuple = ()
    mu: float = 1.0
    p: float = 2.0
    q: float = 2.0
    nonlinear: bool = True
    record_pressure: bool = True
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError("t_end must be positive")
        if not (self.p > 1 and self.q > 1):
            raise ValueError("p and q must exceed 1")
        if not (1.0 / self.q < self.mu <= 1.0):
            raise ValueError("mu must lie in (1/q, 1]")
        if self.snapshot_stride < 0 or self.snapshot_count < 1:
            raise ValueError("snapshot stride must be >= 0 and snapshot count >= 1")
        if not 0 < self.snapshot_ratio < 1:
            raise ValueError("snapshot_ratio must lie in (0, 1)")
        self.norms = tuple(NormSpec.parse(n) if isinstance(n, str) else n for n in self.norms)
        if 1.0 / self.p + 1.0 / self.q > self.mu:
            self.warnings.append(
                f"1/p + 1/q = {1 / self.p + 1 / self.q:g} exceeds mu = {self.mu:g}; outside the critical range"
            )

    @classmethod
    def from_mapping(cls, m: dict) -> "RunConfig":
        """Build from flat keys (h, nx, ny, nz, bc, dt, t_end, ...)."""
        m = dict(m)
        spec_keys = {"h", "nx", "ny", "nz", "bc"}
        res = m.pop("resolution", None)
        spec_kw = {k: m.pop(k) for k in list(m) if k in spec_keys}
        if res is not None:
            for k in ("nx", "ny", "nz"):
                spec_kw.setdefault(k, res)
        names = {f.name for f in dataclasses.fields(cls)} - {"spec", "warnings"}
        unknown = set(m) - names
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "norms" in m and isinstance(m["norms"], str):
            m["norms"] = [s for s in m["norms"].split(";") if s.strip()]
        if "forcing_files" in m:
            m["forcing_files"] = tuple(m["forcing_files"])
        return cls(spec=DomainSpec(**spec_kw), **m)


# -- initial data -------------------------------------------------------------------


def initial_field(domain: Domain, name: str, *, amplitude: float = 1.0, seed: int = 0,
                  theta: float = 0.25, p: float = 2.0, q: float = 2.0) -> VelocityField:
    """Initial data presets (always projected onto the solenoidal space).

    zero, taylor_green (barotropic vortex array), eigenmode (k = (1, 0),
    second vertical mode, perpendicular to k), baroclinic (smooth 3D field),
    random (smooth random field normalized to H^1 norm = amplitude), rough
    (random-phase Besov-critical data); anything else is read as a snapshot
    path.
    """
    from .analysis import generate_rough_data
    from .random_fields import power_decay, random_field

    d = domain
    b = d.basis
    if name == "zero":
        return VelocityField.zeros(d)
    if name == "taylor_green":
        v = VelocityField.from_function(d, lambda x, y, z: (
            np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
            -np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)))
        return amplitude * project(v)
    if name == "eigenmode":
        c = np.zeros((2,) + d.shape, dtype=complex)
        m = 1 if b.nmodes > 1 else 0
        c[1, m, 0, 1] = c[1, m, 0, -1] = 0.5 * amplitude
        return VelocityField(d, c)
    if name == "baroclinic":
        def fn(x, y, z):
            zeta = (z + d.h) / d.h
            env = np.sin(np.pi * zeta / 2) if d.bc.value in ("bottom", "dirichlet") else 1.0
            env2 = np.cos(np.pi * zeta / 2) if d.bc.value in ("upper", "dirichlet") else 1.0
            a = env * env2
            return (a * (np.sin(2 * np.pi * y) * np.cos(np.pi * zeta) + 0.5 * np.cos(2 * np.pi * (x + y))),
                    a * (np.cos(2 * np.pi * x) * np.sin(np.pi * zeta) + 0.3 * np.sin(2 * np.pi * x)))
        return amplitude * project(VelocityField.from_function(d, fn))
    if name == "random":
        from .norms import sobolev_norm

        v = random_field(d, seed, power_decay(1.75))
        s = sobolev_norm(v, 1.0)
        return v if s == 0 else (amplitude / s) * v
    if name == "rough":
        return generate_rough_data(d, p, q, theta, seed)
    path = Path(name)
    if path.suffix in (".bin", ".hydro", ".snap") or path.exists():
        from .io import read_snapshot

        header, values = read_snapshot(path)
        if header.spec != d.spec:
            raise ValueError("initial snapshot does not match the run domain")
        return project(VelocityField.from_grid(d, values))
    raise ValueError(f"unknown initial-data preset {name!r}")


# -- stepping -----------------------------------------------------------------------


@dataclass
class State:
    t: float
    coef: np.ndarray
    g_prev: np.ndarray | None = None
    dt_prev: float | None = None
    step: int = 0


class Stepper:
    """CNAB2 integrator for v_t = A v - F(v) + P f on one domain."""

    def __init__(self, domain: Domain, forcing: Forcing | None = None, nonlinear: bool = True):
        self.domain = domain
        self.forcing = forcing or Forcing.zero()
        self.nonlinear = nonlinear
        self.op = stokes_operator(domain)
        self._pf_cache = None

    def projected_forcing(self, t: float) -> np.ndarray:
        if self.forcing.is_zero:
            return np.zeros((2,) + self.domain.shape, dtype=complex)
        if self.forcing.kind in ("steady", "kolmogorov", "manufactured_stokes"):
            if self._pf_cache is None:
                self._pf_cache = project(self.forcing(t, self.domain)).coef * self.domain.active
            return self._pf_cache
        return project(self.forcing(t, self.domain)).coef * self.domain.active

    def explicit(self, coef: np.ndarray, t: float) -> np.ndarray:
        """G(v, t) = -F(v) + P f(t) on the active modes."""
        g = self.projected_forcing(t).copy()
        if self.nonlinear:
            v = VelocityField(self.domain, coef)
            g -= advect(v, v).coef
        return g

    def _cn(self, coef: np.ndarray, g: np.ndarray, dt: float) -> np.ndarray:
        d = self.domain
        rhs = coef + 0.5 * dt * _stokes_coef(d, coef) + dt * g
        out = self.op.solve_shifted(rhs, 1.0, 0.5 * dt)
        return np.where(d.active, out, 0.0)

    def step(self, state: State, dt: float) -> State:
        """Advance one step; raises BlowupError on non-finite or huge values."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        g_now = self.explicit(state.coef, state.t)
        if state.g_prev is None or state.dt_prev != dt:
            pred = self._cn(state.coef, g_now, dt)
            g_next = self.explicit(pred, state.t + dt)
            new = self._cn(state.coef, 0.5 * (g_now + g_next), dt)
        else:
            new = self._cn(state.coef, 1.5 * g_now - 0.5 * state.g_prev, dt)
        t_new = state.t + dt
        if not np.all(np.isfinite(new)):
            raise BlowupError(t_new, "non-finite values")
        if np.sqrt(np.sum(np.abs(new) ** 2 * self.domain.mode_weights)) > BLOWUP_LIMIT:
            raise BlowupError(t_new, f"L2 norm above {BLOWUP_LIMIT:g}")
        return State(t_new, new, g_now, dt, state.step + 1)


def _stokes_coef(d: Domain, coef: np.ndarray) -> np.ndarray:
    from .hydrostatic import _projector

    return _projector(d).apply_coef(-d.symbol * coef)


def time_derivative(v: VelocityField, t: float, forcing: Forcing | None = None,
                    nonlinear: bool = True) -> VelocityField:
    """v_t = A v - F(v) + P f from the equation, exact given v."""
    d = v.domain
    coef = _stokes_coef(d, galerkin(v).coef)
    if nonlinear:
        coef = coef - advect(v, v).coef
    if forcing is not None and not forcing.is_zero:
        coef = coef + project(forcing(t, d)).coef
    return VelocityField(d, coef)


def pressure_residual(v: VelocityField, t: float, forcing: Forcing | None = None,
                      nonlinear: bool = True, v_t: VelocityField | None = None) -> VelocityField:
    """f - v_t - (v . grad_H v + w d_z v) + Delta v in Galerkin coefficients."""
    d = v.domain
    v = galerkin(v)
    if v_t is None:
        v_t = time_derivative(v, t, forcing, nonlinear)
    coef = -d.symbol * v.coef - galerkin(v_t).coef
    if nonlinear:
        coef = coef - advection_raw(v, v)
    if forcing is not None and not forcing.is_zero:
        coef = coef + galerkin(forcing(t, d)).coef
    return VelocityField(d, coef)


# -- trajectory ---------------------------------------------------------------------


@dataclass
class Snapshot:
    """Solution at one step plus the following step (for midpoint quotients)."""

    t: float
    step: int
    coef: np.ndarray
    coef_next: np.ndarray | None
    dt: float
    pressure: np.ndarray | None = None


@dataclass
class TrajectoryRecord:
    """Snapshots and scalar diagnostics of one run."""

    spec: DomainSpec
    dt: float
    mu: float
    p: float
    q: float
    nonlinear: bool
    forcing: Forcing
    snapshots: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    weighted: dict = field(default_factory=dict)
    energy0: float = 0.0
    blowup: float | None = None
    warnings: list = field(default_factory=list)

    @property
    def domain(self) -> Domain:
        return make_domain(self.spec)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def field(self, i: int) -> VelocityField:
        return VelocityField(self.domain, self.snapshots[i].coef)

    def series(self, name: str) -> np.ndarray:
        return np.asarray(self.diagnostics[name], dtype=float)

    def diag_rows(self, names: list | None = None) -> tuple:
        names = list(self.diagnostics) if names is None else names
        rows = [[t] + [self.diagnostics[n][i] for n in names] for i, t in enumerate(self.times)]
        return ["time"] + names, rows


def snapshot_steps(nsteps: int, dt: float, t_end: float, stride: int, count: int, ratio: float) -> list:
    """Step indices at which snapshots are taken (always includes 0 and nsteps).

    With ``stride`` 0 the times are geometric, t_j = t_end ratio^(count - j).
    """
    if stride > 0:
        steps = set(range(0, nsteps + 1, stride))
    else:
        steps = {int(round(t_end * ratio ** (count - j) / dt)) for j in range(count + 1)}
        steps = {s for s in steps if s >= 1}
    steps |= {0, nsteps}
    return sorted(s for s in steps if 0 <= s <= nsteps)


def run(config: RunConfig, *, out_dir: str | Path | None = None, raise_on_blowup: bool = True,
        v0: VelocityField | None = None, forcing: Forcing | None = None) -> TrajectoryRecord:
    """Integrate to t_end, recording diagnostics at snapshot steps."""
    d = make_domain(config.spec)
    if v0 is None:
        v0 = initial_field(d, config.initial, amplitude=config.amplitude, seed=config.seed,
                           theta=config.theta, p=config.p, q=config.q)
    v0 = project(VelocityField(d, np.where(d.active, galerkin(v0).coef, 0.0)))
    if forcing is None:
        forcing = _forcing_from_config(config, d)
    stepper = Stepper(d, forcing, config.nonlinear)
    nsteps = int(round(config.t_end / config.dt))
    if nsteps < 1 or abs(nsteps * config.dt - config.t_end) > 1e-9 * config.t_end:
        raise ValueError("t_end must be a positive integer multiple of dt")
    marks = set(snapshot_steps(nsteps, config.dt, config.t_end, config.snapshot_stride,
                               config.snapshot_count, config.snapshot_ratio))
    rec = TrajectoryRecord(config.spec, config.dt, config.mu, config.p, config.q, config.nonlinear,
                           forcing, warnings=list(config.warnings))
    rec.energy0 = l2_norm(v0) ** 2
    for w in rec.warnings:
        log.warning(w)

    state = State(0.0, v0.coef)
    diss = work = 0.0
    pending = None
    try:
        for n in range(nsteps + 1):
            if n in marks:
                pending = (state, diss, work)
            if n == nsteps and pending is None:
                break
            new = stepper.step(state, config.dt)
            mid = VelocityField(d, 0.5 * (state.coef + new.coef))
            diss += config.dt * grad_norm2(mid)
            if not forcing.is_zero:
                work += config.dt * inner(galerkin(forcing(state.t + 0.5 * config.dt, d)), mid)
            if pending is not None:
                s0, dis0, wk0 = pending
                _record(rec, s0, new.coef, config, dis0, wk0, stepper)
                pending = None
            if n == nsteps:
                break
            state = new
    except BlowupError as exc:
        rec.blowup = exc.t
        rec.warnings.append(str(exc))
        if raise_on_blowup:
            raise
    _accumulate_weighted(rec)
    if out_dir is not None:
        _write_outputs(rec, Path(out_dir))
    return rec


def _forcing_from_config(config: RunConfig, d: Domain) -> Forcing:
    if config.forcing == "zero":
        return Forcing.zero()
    if config.forcing == "kolmogorov":
        return Forcing.kolmogorov(d, config.forcing_amplitude)
    if config.forcing == "file":
        if not config.forcing_files:
            raise ValueError("forcing 'file' needs forcing_files")
        return Forcing.file_series(list(config.forcing_files), d)
    raise ValueError(f"unknown forcing {config.forcing!r}")


def _record(rec: TrajectoryRecord, state: State, coef_next: np.ndarray, config: RunConfig,
            diss: float, work: float, stepper: Stepper):
    d = rec.domain
    v = VelocityField(d, state.coef)
    vt = time_derivative(v, state.t, stepper.forcing, stepper.nonlinear)
    pressure = None
    if config.record_pressure:
        res = pressure_residual(v, state.t, stepper.forcing, stepper.nonlinear, vt)
        pressure = recover_surface_pressure(res).coef
    rec.snapshots.append(Snapshot(state.t, state.step, state.coef, coef_next, config.dt, pressure))
    energy = l2_norm(v) ** 2
    av = _stokes_coef(d, v.coef)
    vals = {
        "energy": energy,
        "dissipation": diss,
        "work": work,
        "energy_residual": energy + 2 * diss - 2 * work - rec.energy0,
        "grad_norm": math.sqrt(grad_norm2(v)),
        "Av_norm": math.sqrt(float(np.sum(np.abs(av) ** 2 * d.mode_weights))),
        "vt_norm": l2_norm(vt),
    }
    for spec in config.norms:
        if spec.family != "time_weighted":
            vals[spec.label] = norm(v, spec)
    for k, val in vals.items():
        rec.diagnostics.setdefault(k, []).append(float(val))


def _accumulate_weighted(rec: TrajectoryRecord):
    """Cumulative trapezoid integrals int t^{(1-mu) q} ||.||^q dt."""
    t = rec.times
    if t.size == 0:
        return
    wexp = (1.0 - rec.mu) * rec.q
    for name in ("Av_norm", "vt_norm"):
        y = t**wexp * rec.series(name) ** rec.q
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))])
        rec.weighted[name] = cum
        rec.diagnostics[f"tw_{name}"] = list(cum)


def _write_outputs(rec: TrajectoryRecord, out: Path):
    from .io import SnapshotHeader, append_diag, write_snapshot

    out.mkdir(parents=True, exist_ok=True)
    diag = out / "diagnostics.csv"
    if diag.exists():
        diag.unlink()
    header, rows = rec.diag_rows()
    for row in rows:
        append_diag(diag, dict(zip(header, row)))
    d = rec.domain
    for i, snap in enumerate(rec.snapshots):
        h = SnapshotHeader(spec=rec.spec, time=snap.t, dt=snap.dt)
        write_snapshot(out / f"snap_{i:04d}.hydro", h, d.from_spectral(snap.coef))


# -- time derivative diagnostics ------------------------------------------------------


@dataclass
class TimeDerivativeReport:
    times: np.ndarray
    vt_norm: np.ndarray
    t_vt_norm: np.ndarray
    t_Avt_norm: np.ndarray
    t_vtt_norm: np.ndarray | None
    sup_t_vt: float
    sup_t_Avt: float
    bounded: bool
    flags: list


def time_derivative_record(rec: TrajectoryRecord, *, need_ft: bool = False,
                           growth_tol: float = 4.0) -> TimeDerivativeReport:
    """||v_t||, t ||v_t|| and t ||A v_t|| per snapshot from the equation residual.

    ``t ||v_tt||`` additionally needs d f/dt; with ``need_ft`` a missing
    derivative raises, otherwise the column is omitted with a flag.
    """
    d = rec.domain
    f = rec.forcing
    flags = []
    have_ft = f.has_derivative
    if need_ft and not have_ft:
        raise MissingForcingDerivativeError("forcing time derivative unavailable")
    if not have_ft:
        flags.append("v_tt omitted: forcing has no time derivative")
    ts, vn, avn, vttn = [], [], [], []
    for snap in rec.snapshots:
        v = VelocityField(d, snap.coef)
        vt = time_derivative(v, snap.t, f, rec.nonlinear)
        ts.append(snap.t)
        vn.append(l2_norm(vt))
        avn.append(math.sqrt(float(np.sum(np.abs(_stokes_coef(d, vt.coef)) ** 2 * d.mode_weights))))
        if have_ft:
            c = _stokes_coef(d, vt.coef)
            if rec.nonlinear:
                c = c - advect(vt, v).coef - advect(v, vt).coef
            if not f.is_zero:
                c = c + project(f.derivative(snap.t, d)).coef
            vttn.append(l2_norm(VelocityField(d, c)))
    t = np.array(ts)
    tv = t * np.array(vn)
    tav = t * np.array(avn)
    bounded = bool(np.all(np.isfinite(tv)) and np.all(np.isfinite(tav)))
    if bounded and t.size >= 3:
        early = max(1, t.size // 3)
        later = max(tv[early:].max(), 1e-300)
        if tv[1:early + 1].max() > growth_tol * later:
            bounded = False
            flags.append("t ||v_t|| grows toward t = 0")
    return TimeDerivativeReport(
        t, np.array(vn), tv, tav, t * np.array(vttn) if have_ft else None,
        float(np.max(tv)) if tv.size else 0.0, float(np.max(tav)) if tav.size else 0.0, bounded, flags,
    )

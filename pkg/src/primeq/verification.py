"""Named verification suites.  Each returns a list of :class:`Check` results."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .analysis import (analyticity_radius, apriori_ledger, decay_rate, fit_analyticity_radius, generate_rough_data,
                       smoothing_tracker, split_residual)
from .domain import BCVariant, DomainSpec, make_domain
from .fields import VelocityField, inner, l2_norm
from .hydrostatic import (Projector, apply_semigroup, project, spectrum,
                          spectrum_oracle)
from .nonlinear import advect, advect_divergence_form, barotropic_reference, bilinear_estimate_probe
from .norms import besov_norm, sobolev_norm
from .random_fields import power_decay, random_field
from .stepper import RunConfig, run

__all__ = ["Check", "SUITES", "run_suite", "known_radius_field"]

BCS = tuple(BCVariant)


@dataclass
class Check:
    suite: str
    name: str
    value: float
    target: str
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.suite}.{self.name} value={self.value:.6g} target={self.target}"


def _domain(res: int, bc=BCVariant.NEUMANN, h: float = 1.0):
    return make_domain(DomainSpec(h=h, nx=res, ny=res, nz=res, bc=bc))


def suite_spectrum(res: int = 16, seed: int = 0) -> list:
    out = []
    worst_sep = {bc: 0.0 for bc in BCS}
    worst_con = 0.0
    gap_ok = True
    for bc in BCS:
        for h in (0.5, 1.0, 2.0):
            d = _domain(res, bc, h)
            got = spectrum(d, 50).values(50)
            sep = spectrum_oracle(d.spec, 50, separable_only=True)
            con = spectrum_oracle(d.spec, 50)
            worst_sep[bc] = max(worst_sep[bc], float(np.max(np.abs(got - sep) / np.maximum(sep, 1.0))))
            worst_con = max(worst_con, float(np.max(np.abs(got - con) / np.maximum(con, 1.0))))
            c = got[0]
            if bc is BCVariant.NEUMANN:
                gap_ok &= abs(c) < 1e-12
            else:
                gap_ok &= c >= min((math.pi / (2 * h)) ** 2, 4 * math.pi**2) * (1 - 1e-12)
    for bc in BCS:
        out.append(Check("spectrum", f"separable_oracle_{bc.value}", worst_sep[bc], "<=1e-10",
                         worst_sep[bc] <= 1e-10))
    out.append(Check("spectrum", "constrained_oracle_all", worst_con, "<=1e-10", worst_con <= 1e-10))
    out.append(Check("spectrum", "smallest_eigenvalue_gap", float(gap_ok), "==1", gap_ok))
    return out


def suite_projection(res: int = 16, seed: int = 0) -> list:
    idem = ann = orth = div = 0.0
    for i, bc in enumerate(BCS):
        d = _domain(res, bc)
        v = random_field(d, seed + i, power_decay(1.0), solenoidal=False)
        u = random_field(d, seed + 10 + i, power_decay(1.0), solenoidal=False)
        pv = project(v)
        idem = max(idem, l2_norm(project(pv) - pv) / l2_norm(v))
        phi = random_field(d, seed + 20 + i, power_decay(1.0), solenoidal=False).coef[0, 0]
        phi = phi - phi[0, 0]
        grad = VelocityField(d, np.zeros((2,) + d.shape), np.stack([1j * d.xi_x * phi, 1j * d.xi_y * phi]))
        ann = max(ann, l2_norm(project(grad)) / l2_norm(grad))
        orth = max(orth, abs(inner(v - pv, project(u))) / (l2_norm(v) * l2_norm(u)))
        div = max(div, float(np.abs(Projector(d).constraint(pv.coef)).max()))
    return [
        Check("projection", "idempotence", idem, "<=1e-12", idem <= 1e-12),
        Check("projection", "gradient_annihilation", ann, "<=1e-12", ann <= 1e-12),
        Check("projection", "mean_divergence_coefficients", div, "<=1e-12", div <= 1e-12),
        Check("projection", "l2_orthogonality", orth, "<=1e-10", orth <= 1e-10),
    ]


def suite_semigroup(res: int = 16, seed: int = 0) -> list:
    rate_err = comp = 0.0
    for i, bc in enumerate(BCS):
        d = _domain(res, bc)
        v0 = random_field(d, seed + i, power_decay(1.0))
        if bc is BCVariant.NEUMANN:
            c = v0.coef.copy()
            c[:, 0, 0, 0] = 0.0
            v0 = VelocityField(d, c)
        lam = spectrum(d).entries
        smallest = min(e.eigenvalue for e in lam if e.eigenvalue > 1e-12)
        rate_err = max(rate_err, abs(decay_rate(v0) - smallest) / smallest)
        for s, t in ((0.01, 0.02), (0.1, 0.05)):
            a = apply_semigroup(v0, s + t)
            b = apply_semigroup(apply_semigroup(v0, s), t)
            comp = max(comp, l2_norm(a - b) / l2_norm(a))
    return [
        Check("semigroup", "decay_rate_rel_error", rate_err, "<=0.02", rate_err <= 0.02),
        Check("semigroup", "composition", comp, "<=1e-12", comp <= 1e-12),
    ]


ENERGY_AMPLITUDE = 0.1


def _energy_run(res: int, dt: float):
    cfg = RunConfig(spec=DomainSpec(nx=res, ny=res, nz=res), initial="baroclinic", amplitude=ENERGY_AMPLITUDE,
                    dt=dt, t_end=0.5, snapshot_stride=int(round(0.1 / dt)), record_pressure=False)
    rec = run(cfg)
    return float(np.max(np.abs(rec.series("energy_residual")))), rec.energy0


def suite_energy(res: int = 16, seed: int = 0) -> list:
    r1, e0 = _energy_run(res, 1e-3)
    r2, _ = _energy_run(res, 5e-4)
    ratio = r1 / r2 if r2 > 0 else math.inf
    return [
        Check("energy", "halving_ratio", ratio, "in [3,5]", 3 <= ratio <= 5),
        Check("energy", "relative_residual_dt1e-3", r1 / e0, "<=1e-6", r1 <= 1e-6 * e0),
    ]


def suite_nonlinearity(res: int = 16, seed: int = 0) -> list:
    neutral = bil = 0.0
    for i, bc in enumerate(BCS):
        d = _domain(res, bc)
        v = random_field(d, seed + i, power_decay(1.0))
        u = random_field(d, seed + 10 + i, power_decay(1.0))
        w = random_field(d, seed + 20 + i, power_decay(1.0))
        scale = sobolev_norm(v, 1) * l2_norm(v) ** 2
        neutral = max(neutral, abs(inner(advect(v, v), v)) / scale)
        lhs = advect(2.0 * v - 0.5 * u, w)
        rhs = 2.0 * advect(v, w) - 0.5 * advect(u, w)
        bil = max(bil, l2_norm(lhs - rhs) / l2_norm(lhs))
    d = _domain(res)
    v = random_field(d, seed + 30, power_decay(1.0))
    c = v.coef.copy()
    c[:, 1:] = 0.0
    vb = project(VelocityField(d, c))
    got = advect(vb, vb).coef
    ref = barotropic_reference(vb.coef[:, 0], d)
    two_d = float(max(np.abs(got[:, 0] - ref).max(), np.abs(got[:, 1:]).max()) / np.abs(ref).max())
    div_form = l2_norm(advect(v, v) - advect_divergence_form(v, v)) / l2_norm(advect(v, v))
    return [
        Check("nonlinearity", "energy_neutrality", neutral, "<=1e-8", neutral <= 1e-8),
        Check("nonlinearity", "bilinearity", bil, "<=1e-12", bil <= 1e-12),
        Check("nonlinearity", "barotropic_2d_reference", two_d, "<=1e-10", two_d <= 1e-10),
        Check("nonlinearity", "divergence_form", div_form, "<=1e-8", div_form <= 1e-8),
    ]


def suite_bilinear(res: int = 16, seed: int = 0) -> list:
    lo = bilinear_estimate_probe(100, 0.0, resolution=8, seed=seed)
    hi = bilinear_estimate_probe(100, 0.0, resolution=res, seed=seed)
    ratio = max(lo.max, hi.max) / min(lo.max, hi.max)
    return [Check("bilinear", "max_ratio_spread", ratio, "<3", ratio < 3)]


def suite_apriori(res: int = 16, seed: int = 0) -> list:
    out = []
    for bc in BCS:
        cfg = RunConfig(spec=DomainSpec(nx=res, ny=res, nz=res, bc=bc), initial="random", amplitude=5.0,
                        seed=seed, dt=1e-3, t_end=1.0, snapshot_stride=50)
        rec = run(cfg, raise_on_blowup=False)
        led = apriori_ledger(rec)
        ok = rec.blowup is None and led.finite and led.bound < 1e6
        out.append(Check("apriori", f"ledger_{bc.value}", led.bound, "finite,<1e6,no blowup", ok))
    return out


def _rough_run(res: int, seed: int):
    d = _domain(res)
    v0 = generate_rough_data(d, 4, 4, 0.25, seed, normalize_at=16)
    cfg = RunConfig(spec=d.spec, initial="rough", dt=2.5e-4, t_end=0.1, snapshot_count=10,
                    snapshot_ratio=10**-0.1, mu=0.5, p=4, q=4, record_pressure=False)
    return v0, smoothing_tracker(run(cfg, v0=v0))


def suite_smoothing(res: int = 16, seed: int = 0) -> list:
    v_lo, lo = _rough_run(res, seed)
    v_hi, hi = _rough_run(2 * res, seed)
    b_lo, b_hi = besov_norm(v_lo, 0.5, 4, 4), besov_norm(v_hi, 0.5, 4, 4)
    sup_change = abs(hi.sup_weighted_Av / lo.sup_weighted_Av - 1)
    growth = hi.Av_initial / lo.Av_initial
    besov_change = abs(b_hi / b_lo - 1)
    return [
        Check("smoothing", "besov_estimator_change", besov_change, "<=0.2", besov_change <= 0.2),
        Check("smoothing", "weighted_sup_change", sup_change, "<=0.2", sup_change <= 0.2),
        Check("smoothing", "Av0_growth", growth, ">=2", growth >= 2),
        Check("smoothing", "t_vt_bounded", max(lo.sup_t_vt, hi.sup_t_vt), "bounded",
              lo.bounded and hi.bounded),
    ]


def known_radius_field(d, sigma0: float) -> VelocityField:
    """Closed-form field whose Neumann-basis coefficients are exp(-sigma0 (|2 pi k| + m pi / h)).

    Poisson kernel in one horizontal direction times the cosine-series kernel
    sum_m r^m cos(m pi (z + h) / h) in z.
    """
    r = math.exp(-2 * math.pi * sigma0)
    rz = math.exp(-math.pi * sigma0 / d.h)

    def poisson(x):
        return (1 - r * r) / (1 - 2 * r * np.cos(2 * np.pi * x) + r * r)

    def vertical(z):
        c = np.cos(np.pi * (z + d.h) / d.h)
        return (1 - rz * c) / (1 - 2 * rz * c + rz * rz)

    return VelocityField.from_function(d, lambda x, y, z: (poisson(y) * vertical(z), poisson(x) * vertical(z)))


def suite_analyticity(res: int = 32, seed: int = 0) -> list:
    d = _domain(res)
    sigma0 = 0.2
    synth = fit_analyticity_radius(known_radius_field(d, sigma0)).sigma
    synth_err = abs(synth / sigma0 - 1)
    v0 = generate_rough_data(d, 4, 4, 0.25, seed)
    ts = np.geomspace(0.004, 0.1, 10)
    sig = np.array([fit_analyticity_radius(apply_semigroup(v0, t)).sigma for t in ts])
    expo = float(np.polyfit(np.log(ts), np.log(sig), 1)[0])
    cfg = RunConfig(spec=DomainSpec(nx=16, ny=16, nz=16), initial="random", amplitude=5.0, seed=seed,
                    dt=1e-3, t_end=0.3, snapshot_stride=25, record_pressure=False)
    rec = run(cfg)
    t, s, flagged = analyticity_radius(rec)
    late = t >= 0.05
    min_sigma = float(np.min(s[late]))
    return [
        Check("analyticity", "synthetic_radius_rel_error", synth_err, "<=0.02", synth_err <= 0.02),
        Check("analyticity", "linear_growth_exponent", expo, "in [0.4,0.6]", 0.4 <= expo <= 0.6),
        Check("analyticity", "nonlinear_sigma_min_t>=0.05", min_sigma, ">0",
              bool(min_sigma > 0 and not np.any(flagged[late]))),
    ]


def suite_split(res: int = 16, seed: int = 0) -> list:
    def go(dt, initial):
        cfg = RunConfig(spec=DomainSpec(nx=res, ny=res, nz=res), initial=initial, amplitude=1.0, seed=seed,
                        dt=dt, t_end=0.2, snapshot_stride=int(round(0.05 / dt)), record_pressure=False)
        return split_residual(run(cfg))

    a, b = go(2e-3, "baroclinic"), go(1e-3, "baroclinic")
    rb = float(np.max(a.vbar[1:]) / np.max(b.vbar[1:]))
    rt = float(np.max(a.vtilde[1:]) / np.max(b.vtilde[1:]))
    baro = go(2e-3, "taylor_green")
    zero = float(np.max(baro.vtilde) / max(np.max(baro.scale), 1e-300))
    return [
        Check("split", "vbar_halving_ratio", rb, "in [3,5]", 3 <= rb <= 5),
        Check("split", "vtilde_halving_ratio", rt, "in [3,5]", 3 <= rt <= 5),
        Check("split", "barotropic_vtilde_residual", zero, "<=1e-12", zero <= 1e-12),
    ]


def suite_besov(res: int = 16, seed: int = 0) -> list:
    vals = []
    hs = []
    for n in (res, 2 * res):
        d = _domain(n)
        v = generate_rough_data(d, 4, 4, 0.25, seed, normalize_at=res)
        vals.append(besov_norm(v, 0.5, 4, 4))
        hs.append(sobolev_norm(v, 2))
    stab = abs(vals[1] / vals[0] - 1)
    growth = hs[1] / hs[0]
    d = _domain(res)
    v = VelocityField.from_function(d, lambda x, y, z: (np.cos(2 * np.pi * x) + 0 * z, 0 * x))
    ratio_lo = besov_norm(v, 0, 2, 2) / l2_norm(v)
    d2 = _domain(2 * res)
    v2 = VelocityField.from_function(d2, lambda x, y, z: (np.cos(2 * np.pi * x) + 0 * z, 0 * x))
    ratio_hi = besov_norm(v2, 0, 2, 2) / l2_norm(v2)
    rdiff = abs(ratio_hi / ratio_lo - 1)
    return [
        Check("besov", "critical_estimator_stability", stab, "<=0.05", stab <= 0.05),
        Check("besov", "H2_estimator_growth", growth, ">=1.5", growth >= 1.5),
        Check("besov", "single_mode_ratio_resolution_change", rdiff, "<=0.05", rdiff <= 0.05),
    ]


SUITES = {
    "spectrum": suite_spectrum,
    "projection": suite_projection,
    "semigroup": suite_semigroup,
    "energy": suite_energy,
    "nonlinearity": suite_nonlinearity,
    "bilinear": suite_bilinear,
    "apriori": suite_apriori,
    "smoothing": suite_smoothing,
    "analyticity": suite_analyticity,
    "split": suite_split,
    "besov": suite_besov,
}


def run_suite(name: str, res: int | None = None, seed: int = 0) -> tuple:
    """Run one suite; returns (checks, elapsed seconds)."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    fn = SUITES[name]
    t0 = time.perf_counter()
    checks = fn(seed=seed) if res is None else fn(res=res, seed=seed)
    return checks, time.perf_counter() - t0

//! Pointwise check of the differential inequality satisfied by a barrier.
//!
//! The radial equation in divergence form reads
//! `ũ_t = Φ_r + ((N-1)/r + g') Φ` with flux `Φ = ũ^{m-1}|ũ_r|^{p-2}ũ_r`.
//! A supersolution needs `ũ_t - Φ_r - ((N-1)/r + g')Φ >= 0` on `{ũ > 0}`
//! away from `r₀`; a subsolution the reverse. All three terms are taken in
//! closed form from `J, J', J''` (outer zone) or `I, I'` (inner zone).
//!
//! Besides the raw residual, each point also evaluates the reduced form
//! obtained after dividing by the common positive factor
//! `C* A^{(p-1)/k - 1} / (k (t+t₀)^{(k+1)/k})`; both must agree in sign.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barriers::{Barrier, BarrierKind, BarrierParams, TimeSlice};
use crate::envelope::EnvelopeCalculus;
use crate::error::{Error, Result};
use crate::numeric::log_grid;
use crate::weights::InequalityRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Inner,
    Outer,
}

/// The terms of the residual at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTerms {
    pub zone: Zone,
    pub u_t: f64,
    pub flux: f64,
    pub flux_r: f64,
    pub lower: f64,
    /// `u_t - flux_r - lower`
    pub residual: f64,
    /// Residual divided by the common positive factor (reduced form).
    pub reduced: f64,
}

impl PointTerms {
    pub fn scale(&self) -> f64 {
        self.u_t.abs().max(self.flux_r.abs()).max(self.lower.abs())
    }

    pub fn normalized(&self) -> f64 {
        let s = self.scale();
        if s > 0.0 {
            self.residual / s
        } else {
            0.0
        }
    }
}

/// Time-dependent data shared by all radii at one instant.
#[derive(Debug, Clone, Copy)]
pub struct ResidualSlice {
    pub slice: TimeSlice,
    /// `d/d log(t+t₀)` of `E(τ)^{1/(p-1)}`, i.e. `(t+t₀) d/dt`
    pub e_q_rate: f64,
}

/// Closed-form derivatives of a barrier.
#[derive(Debug, Clone, Copy)]
pub struct BarrierCalculus<'a> {
    pub barrier: Barrier<'a>,
    p: f64,
    n: f64,
    k: f64,
    a: f64,
}

impl<'a> BarrierCalculus<'a> {
    pub fn new(params: &'a BarrierParams, calc: &'a EnvelopeCalculus) -> Self {
        let barrier = Barrier::new(params, calc);
        let pr = calc.problem();
        let p = pr.p();
        let k = p + pr.m() - 3.0;
        Self {
            barrier,
            p,
            n: pr.dim() as f64,
            k,
            a: (p - 1.0) / k,
        }
    }

    fn params(&self) -> &BarrierParams {
        self.barrier.params
    }

    fn calc(&self) -> &EnvelopeCalculus {
        self.barrier.calc
    }

    /// Slice for `log(t+t₀) = log_shifted`.
    pub fn slice_log(&self, log_shifted: f64) -> ResidualSlice {
        let pa = self.params();
        let tau = pa.gamma * log_shifted;
        let y = self.calc().big_g_inverse(tau);
        let q = 1.0 / (self.p - 1.0);
        let e = y.powf(self.p) / tau;
        // dE/dτ = (y^p/τ²)(pτ/g(y) - 1), from dG⁻¹/dτ = y/g(y)
        let de_dtau = y.powf(self.p) / (tau * tau) * (self.p * tau / self.calc().g(y) - 1.0);
        let t = if pa.log_t0.exp().is_finite() {
            pa.log_t0.exp() * (log_shifted - pa.log_t0).exp_m1()
        } else {
            f64::INFINITY
        };
        ResidualSlice {
            slice: TimeSlice {
                t,
                log_shifted,
                tau,
                e_q: e.powf(q),
                amplitude: pa.c_star * (-log_shifted / self.k).exp(),
            },
            e_q_rate: pa.gamma * q * e.powf(q - 1.0) * de_dtau,
        }
    }

    pub fn slice(&self, t: f64) -> ResidualSlice {
        self.slice_log(self.params().log_shifted(t))
    }

    /// `(t+t₀)^{-(k+1)/k}`
    fn decay(&self, s: &ResidualSlice) -> f64 {
        (-s.slice.log_shifted * (self.k + 1.0) / self.k).exp()
    }

    fn lower_coeff(&self, r: f64) -> f64 {
        (self.n - 1.0) / r + self.calc().weight().g_prime(r)
    }

    fn u_t(&self, s: &ResidualSlice, bracket: f64) -> f64 {
        let c = self.params().c_star;
        let ls = s.slice.log_shifted;
        let rate = s.e_q_rate * (-ls).exp();
        -c / self.k * bracket.powf(self.a) * self.decay(s) + self.a * c * bracket.powf(self.a - 1.0) * (-ls / self.k).exp() * rate
    }

    /// Outer zone `r >= r₀`, where `A = E^{1/(p-1)} - J^{1/(p-1)} > 0`.
    pub fn outer(&self, s: &ResidualSlice, r: f64) -> PointTerms {
        let (p, k, a) = (self.p, self.k, self.a);
        let c = self.params().c_star;
        let (j, j1, j2) = self.calc().j_derivatives(r);
        let bracket = s.slice.e_q - j.powf(1.0 / (p - 1.0));
        let big_k = c.powf(k + 1.0) / k.powf(p - 1.0);
        let decay = self.decay(s);
        let jj = j.powf(2.0 - p) * j1.powf(p - 1.0);
        let flux = -big_k * bracket.powf(a) * decay * jj;
        let i3 = -j.powf(-p * (p - 2.0) / (p - 1.0)) * j1.powf(p) / k
            + bracket * ((2.0 - p) * j.powf(1.0 - p) * j1.powf(p) + (p - 1.0) * j.powf(2.0 - p) * j1.powf(p - 2.0) * j2);
        let flux_r = -big_k * decay * bracket.powf(a - 1.0) * i3;
        let lc = self.lower_coeff(r);
        let lower = lc * flux;
        let u_t = self.u_t(s, bracket);
        let ck = c.powf(k) / k.powf(p - 2.0);
        let k0 = (p - 1.0) * s.e_q_rate;
        let k1 = -ck * bracket * jj * lc;
        let k2 = -ck * i3;
        PointTerms {
            zone: Zone::Outer,
            u_t,
            flux,
            flux_r,
            lower,
            residual: u_t - flux_r - lower,
            reduced: k0 - bracket - k1 - k2,
        }
    }

    /// Inner zone `r < r₀`, where `B = E^{1/(p-1)} - I(r) > 0`.
    pub fn inner(&self, s: &ResidualSlice, r: f64) -> PointTerms {
        let (p, k, a) = (self.p, self.k, self.a);
        let pa = self.params();
        let c = pa.c_star;
        let g0 = self.barrier.g_r0;
        let bracket = s.slice.e_q - self.barrier.profile(r);
        let nup = (pa.nu0 * p).powf(p - 1.0);
        let big_k = c.powf(k + 1.0) * nup / k.powf(p - 1.0);
        let decay = self.decay(s);
        let flux = -big_k * bracket.powf(a) * decay * r / g0;
        let growth = p * pa.nu0 / k * r.powf(p / (p - 1.0)) / g0.powf(1.0 / (p - 1.0));
        let flux_r = big_k * bracket.powf(a - 1.0) * decay / g0 * (growth - bracket);
        let lc = self.lower_coeff(r);
        let lower = lc * flux;
        let u_t = self.u_t(s, bracket);
        let ck = c.powf(k) * nup / (k.powf(p - 2.0) * g0);
        let k0 = (p - 1.0) * s.e_q_rate;
        let k3 = bracket + ck * (growth - bracket) - lc * ck * bracket * r;
        PointTerms {
            zone: Zone::Inner,
            u_t,
            flux,
            flux_r,
            lower,
            residual: u_t - flux_r - lower,
            reduced: k0 - k3,
        }
    }

    pub fn at(&self, s: &ResidualSlice, r: f64) -> PointTerms {
        if r < self.params().r0 {
            self.inner(s, r)
        } else {
            self.outer(s, r)
        }
    }
}

/// Flux `ũ^{m-1}|ũ_r|^{p-2}ũ_r` in the outer zone; 0 outside the support.
pub fn analytic_flux_outer(params: &BarrierParams, calc: &EnvelopeCalculus, r: f64, t: f64) -> f64 {
    let bc = BarrierCalculus::new(params, calc);
    let s = bc.slice(t);
    if bc.barrier.eval_at(&s.slice, r) <= 0.0 {
        return 0.0;
    }
    bc.outer(&s, r).flux
}

/// Flux in the inner zone `r < r₀`; 0 outside the support.
pub fn analytic_flux_inner(params: &BarrierParams, calc: &EnvelopeCalculus, r: f64, t: f64) -> f64 {
    let bc = BarrierCalculus::new(params, calc);
    let s = bc.slice(t);
    if bc.barrier.eval_at(&s.slice, r) <= 0.0 {
        return 0.0;
    }
    bc.inner(&s, r).flux
}

/// `∂ũ/∂t` inside the support; 0 outside.
pub fn time_derivative(params: &BarrierParams, calc: &EnvelopeCalculus, r: f64, t: f64) -> f64 {
    let bc = BarrierCalculus::new(params, calc);
    let s = bc.slice(t);
    if bc.barrier.eval_at(&s.slice, r) <= 0.0 {
        return 0.0;
    }
    bc.at(&s, r).u_t
}

/// Sample layout for [`verify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualGrid {
    /// Radii per zone and time.
    pub n_radii: usize,
    pub n_times: usize,
    /// `t + t₀` runs geometrically over `[t₀, horizon_factor·t₀]`.
    pub horizon_factor: f64,
    /// Relative half-width of the bands excluded around `r₀` and the edge.
    pub band: f64,
    /// Innermost radius as a fraction of `r₀`.
    pub inner_start: f64,
    pub tol: f64,
}

impl Default for ResidualGrid {
    fn default() -> Self {
        Self {
            n_radii: 400,
            n_times: 40,
            horizon_factor: 1e6,
            band: 1e-3,
            inner_start: 1e-4,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcludedBand {
    pub around: &'static str,
    pub t: f64,
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSample {
    pub r: f64,
    pub t: f64,
    pub zone: Zone,
    /// Normalized residual, signed so that `>= 0` is expected.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub kind: BarrierKind,
    pub n_points: usize,
    pub worst_value: f64,
    pub worst_location: (f64, f64),
    pub tol: f64,
    /// Points where the reduced form and the raw residual disagree in sign.
    pub reduced_form_disagreements: usize,
    pub time_derivative_sandwich: InequalityRecord,
    pub grid: ResidualGrid,
    pub excluded_bands: Vec<ExcludedBand>,
    pub pass: bool,
    #[serde(skip)]
    pub samples: Vec<ResidualSample>,
}

/// Samples the residual on the grid and reports the worst point.
pub fn verify(params: &BarrierParams, calc: &EnvelopeCalculus, grid: &ResidualGrid) -> Result<ResidualReport> {
    if grid.n_radii < 2 || grid.n_times < 1 {
        return Err(Error::Config("residual grid is empty".into()));
    }
    if !(grid.horizon_factor > 1.0 && grid.band > 0.0 && grid.band < 0.5 && grid.inner_start > 0.0 && grid.inner_start < 1.0) {
        return Err(Error::Config("residual grid parameters out of range".into()));
    }
    let bc = BarrierCalculus::new(params, calc);
    let sign = match params.kind {
        BarrierKind::Super => 1.0,
        BarrierKind::Sub => -1.0,
    };
    let r0 = params.r0;
    let logs: Vec<f64> = if grid.n_times == 1 {
        vec![params.log_t0]
    } else {
        log_grid(1.0, grid.horizon_factor, grid.n_times)
            .into_iter()
            .map(|x| params.log_t0 + x.ln())
            .collect()
    };
    let slices: Vec<ResidualSlice> = logs.iter().map(|&l| bc.slice_log(l)).collect();
    let mut bands = vec![ExcludedBand {
        around: "matching_radius",
        t: f64::NAN,
        center: r0,
        half_width: grid.band * r0,
    }];
    let mut zones = Vec::with_capacity(slices.len());
    for s in &slices {
        let edge = bc.barrier.support_radius_at(&s.slice);
        let lo = r0 * (1.0 + grid.band);
        let hi = edge * (1.0 - grid.band);
        if !(hi > lo) {
            return Err(Error::Config(format!(
                "excluded bands cover the outer zone at t = {}: r0 = {r0}, edge = {edge}",
                s.slice.t
            )));
        }
        bands.push(ExcludedBand {
            around: "support_edge",
            t: s.slice.t,
            center: edge,
            half_width: grid.band * edge,
        });
        zones.push((lo, hi));
    }
    bands[0].t = 0.0;
    let inner_radii = log_grid(grid.inner_start * r0, r0 * (1.0 - grid.band), grid.n_radii);

    let a1 = calc.weight().alpha1();
    let a2 = calc.weight().alpha2();
    let p = calc.problem().p();
    let mut sandwich = InequalityRecord::tracker("time_derivative_sandwich", 1e-8);
    for s in &slices {
        let base = s.slice.e_q / s.slice.tau * params.gamma / (p - 1.0);
        sandwich.check(s.slice.t, base * (p - a2) / a2, s.e_q_rate, base * (p - a1) / a1);
    }

    let per_time: Vec<(Vec<ResidualSample>, usize)> = slices
        .par_iter()
        .zip(zones.par_iter())
        .map(|(s, &(lo, hi))| {
            let mut out = Vec::with_capacity(2 * grid.n_radii);
            let mut disagreements = 0;
            let outer_radii = log_grid(lo, hi, grid.n_radii);
            for &r in inner_radii.iter().chain(outer_radii.iter()) {
                let terms = bc.at(s, r);
                let v = sign * terms.normalized();
                let red_sign = terms.reduced.signum();
                if terms.normalized().abs() > 1e-10 && red_sign != terms.residual.signum() {
                    disagreements += 1;
                }
                out.push(ResidualSample {
                    r,
                    t: s.slice.t,
                    zone: terms.zone,
                    value: v,
                });
            }
            (out, disagreements)
        })
        .collect();

    let mut samples = Vec::new();
    let mut disagreements = 0;
    for (v, d) in per_time {
        samples.extend(v);
        disagreements += d;
    }
    let (mut worst, mut loc) = (f64::INFINITY, (f64::NAN, f64::NAN));
    for s in &samples {
        if s.value < worst || s.value.is_nan() {
            worst = s.value;
            loc = (s.r, s.t);
        }
    }
    let sandwich = sandwich.finish();
    let pass = worst >= -grid.tol && disagreements == 0 && sandwich.pass;
    Ok(ResidualReport {
        kind: params.kind,
        n_points: samples.len(),
        worst_value: worst,
        worst_location: loc,
        tol: grid.tol,
        reduced_form_disagreements: disagreements,
        time_derivative_sandwich: sandwich,
        grid: *grid,
        excluded_bands: bands,
        pass,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::{select_sub, select_super};
    use crate::weights::{ProblemSpec, WeightSpec};
    use approx::assert_relative_eq;

    fn reference() -> EnvelopeCalculus {
        EnvelopeCalculus::new(ProblemSpec::new(3, 2.0, 2.0, WeightSpec::power(1.0).unwrap()).unwrap())
    }

    #[test]
    fn hand_computed_outer_residual() {
        // with J = r and E = τ the residual is
        // C*/(t+t0)² [A(C*-1) + Γ - C* + 2C*A/r]
        let c = reference();
        let p = select_super(&c).unwrap();
        let bc = BarrierCalculus::new(&p, &c);
        for (r, t) in [(1.5, 0.0), (3.0, 10.0), (20.0, 1e4)] {
            let s = bc.slice(t);
            let tt = (p.log_shifted(t)).exp();
            let a = s.slice.tau - r;
            let expect = p.c_star / (tt * tt) * (a * (p.c_star - 1.0) + p.gamma - p.c_star + 2.0 * p.c_star * a / r);
            let got = bc.outer(&s, r).residual;
            assert_relative_eq!(got, expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn power_case_saturates_rate_sandwich() {
        let c = reference();
        let p = select_super(&c).unwrap();
        let bc = BarrierCalculus::new(&p, &c);
        let s = bc.slice(5.0);
        assert_relative_eq!(s.e_q_rate, p.gamma, max_relative = 1e-12);
    }

    #[test]
    fn fluxes_match_at_matching_radius() {
        let c = reference();
        let p = select_super(&c).unwrap();
        let bc = BarrierCalculus::new(&p, &c);
        let s = bc.slice(2.0);
        let o = bc.outer(&s, p.r0).flux;
        let i = bc.inner(&s, p.r0).flux;
        assert_relative_eq!(o, i, max_relative = 1e-10);
        assert_eq!(bc.inner(&s, 0.0).flux, 0.0);
    }

    #[test]
    fn reference_barriers_certify() {
        let c = reference();
        let grid = ResidualGrid {
            n_radii: 60,
            n_times: 8,
            ..Default::default()
        };
        let sup = verify(&select_super(&c).unwrap(), &c, &grid).unwrap();
        assert!(sup.pass, "{sup:?}");
        let sub = verify(&select_sub(&c, 1.0).unwrap(), &c, &grid).unwrap();
        assert!(sub.pass, "{:?}", (sub.worst_value, sub.worst_location));
    }

    #[test]
    fn corrupted_amplitude_fails() {
        let c = reference();
        let mut p = select_super(&c).unwrap();
        p.c_star *= 1e-2;
        let rep = verify(&p, &c, &ResidualGrid { n_radii: 40, n_times: 6, ..Default::default() }).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.reduced_form_disagreements, 0);
    }

    #[test]
    fn empty_grid_is_config_error() {
        let c = reference();
        let p = select_super(&c).unwrap();
        let g = ResidualGrid { n_radii: 0, ..Default::default() };
        assert!(matches!(verify(&p, &c, &g), Err(Error::Config(_))));
        let g = ResidualGrid { band: 0.6, ..Default::default() };
        assert!(matches!(verify(&p, &c, &g), Err(Error::Config(_))));
    }
}

//! Radial change of variables `r = r̂(s)` turning the weighted equation into
//! one with an inhomogeneous density `ρ(s) = r̂_s(s)^p`.
//!
//! `r̂(s) = r̃((1 - s^{-β})/β)`, `β = (N-p)/(p-1)`, where `r̃` solves the
//! autonomous problem `r̃' = F(r̃)`, `F(r) = (e^{g(r)} r^{N-1})^{1/(p-1)}`,
//! `r̃(0) = r*`. The initial value is shot so that the blow-up time
//! `z₁(r*) = ∫_{r*}^∞ dr/F` equals `1/β`, which makes `r̂_s(0⁺) = 1`.
//!
//! For `s > 1` the integration variable is `w = 1/β - z = s^{-β}/β`, which
//! avoids the cancellation in `1/β - z` near the blow-up.

use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeCalculus;
use crate::error::{Error, Result};
use crate::numeric::{invert_increasing_positive, quad_to_infinity};
use crate::weights::{InequalityRecord, ProblemSpec};

/// `F(r) = (e^{g(r)} r^{N-1})^{1/(p-1)}`.
#[inline]
pub fn shooting_rhs(problem: &ProblemSpec, r: f64) -> f64 {
    let nm1 = problem.dim() as f64 - 1.0;
    ((problem.weight().g(r) + nm1 * r.ln()) / (problem.p() - 1.0)).exp()
}

/// `z₁(r*) = ∫_{r*}^∞ dr / F(r)`.
pub fn blowup_time(problem: &ProblemSpec, r_star: f64) -> Result<f64> {
    if !(r_star > 0.0 && r_star.is_finite()) {
        return Err(Error::Domain {
            func: "blowup_time",
            detail: format!("r_star = {r_star} must be positive"),
        });
    }
    let nm1 = problem.dim() as f64 - 1.0;
    let q = 1.0 / (problem.p() - 1.0);
    let w = problem.weight();
    let f = |r: f64| (-(w.g(r) + nm1 * r.ln()) * q).exp();
    quad_to_infinity(&f, r_star, r_star.max(1.0), 1e-13)
}

/// Initial value `r*` with `z₁(r*) = 1/β`.
pub fn shoot_r_star(problem: &ProblemSpec) -> Result<f64> {
    let target = 1.0 / problem.beta();
    let failure = std::cell::RefCell::new(None);
    // z₁ is decreasing, so invert its negative
    let x = invert_increasing_positive(
        |r| match blowup_time(problem, r) {
            Ok(v) => -v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        -target,
        1.0,
        200,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    x.map_err(|e| Error::Numeric(format!("shooting failed: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSample {
    pub s: f64,
    pub r_hat: f64,
    pub r_hat_s: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformOptions {
    pub s_min: f64,
    pub s_max: f64,
    /// Dense samples per decade (used for the plug-back check).
    pub per_decade: usize,
    /// Every `thin`-th dense sample is reported.
    pub thin: usize,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            s_min: 1e-4,
            s_max: 1e8,
            per_decade: 200,
            thin: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformResult {
    pub r_star: f64,
    pub beta: f64,
    /// `|β z₁(r*) - 1|`
    pub shooting_error: f64,
    /// `r̂(1)`, equal to `r*`
    pub anchor: f64,
    /// `ρ(0⁺)` estimated at `s = 10⁻⁴ s_min`; the approach to the limit is
    /// only like `s log(1/s)`, too slow to read off at `s_min` itself.
    pub rho_at_zero: f64,
    /// Largest relative gap between a five-point derivative of the sampled
    /// `r̂` and `F(r̂) s^{-(N-1)/(p-1)}`.
    pub plug_back_residual: f64,
    pub samples: Vec<TransformSample>,
}

/// Integrates `dr/dx = c F(r)` from `x0` down to `x1 < x0` with RK4,
/// limiting each increment to `10⁻⁶(1+r)` and `10⁻³ r`.
fn integrate_down(problem: &ProblemSpec, mut r: f64, x0: f64, x1: f64, c: f64) -> Result<f64> {
    let f = |r: f64| c * shooting_rhs(problem, r);
    let mut x = x0;
    while x > x1 {
        let slope = f(r).abs();
        let mut h = (1e-6 * (1.0 + r)).min(1e-3 * r) / slope;
        if !(h > 0.0) || !h.is_finite() {
            h = x - x1;
        }
        if h < 1e-14 * x.abs().max(1e-300) && x - x1 > h {
            return Err(Error::Numeric(format!("step underflow at x = {x}, r = {r}")));
        }
        let h = h.min(x - x1);
        let k1 = f(r);
        let k2 = f(r - 0.5 * h * k1);
        let k3 = f(r - 0.5 * h * k2);
        let k4 = f(r - h * k3);
        r -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        x = if x - h <= x1 { x1 } else { x - h };
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Numeric(format!("trajectory left (0, inf) at x = {x}")));
        }
    }
    Ok(r)
}

/// Samples `r̂, r̂_s, ρ` on a logarithmic grid in `s`.
pub fn build_transform(problem: &ProblemSpec, opts: &TransformOptions) -> Result<TransformResult> {
    if !(opts.s_min > 0.0 && opts.s_min < 1.0 && opts.s_max > 1.0) || opts.per_decade < 4 || opts.thin == 0 {
        return Err(Error::Config("transform range must straddle s = 1".into()));
    }
    let beta = problem.beta();
    let r_star = shoot_r_star(problem)?;
    let shooting_error = (beta * blowup_time(problem, r_star)? - 1.0).abs();

    // exponents k/per_decade hit s = 1 exactly
    let pd = opts.per_decade as f64;
    let k_lo = (opts.s_min.log10() * pd).ceil() as i64;
    let k_hi = (opts.s_max.log10() * pd).floor() as i64;
    let ss: Vec<f64> = (k_lo..=k_hi).map(|k| 10f64.powf(k as f64 / pd)).collect();
    let one = ss.iter().position(|&s| s == 1.0).expect("grid contains s = 1");
    let mut r_hat = vec![0.0; ss.len()];
    r_hat[one] = r_star;

    // s < 1: z decreases from 0
    let mut r = r_star;
    let mut z = 0.0;
    for i in (0..one).rev() {
        let zi = 1.0 / beta - ss[i].powf(-beta) / beta;
        r = integrate_down(problem, r, z, zi, 1.0)?;
        z = zi;
        r_hat[i] = r;
    }
    let s_probe = ss[0] * 1e-4;
    let z_probe = 1.0 / beta - s_probe.powf(-beta) / beta;
    let r_probe = integrate_down(problem, r, z, z_probe, 1.0)?;
    // s > 1: w = s^{-β}/β decreases from 1/β, dr/dw = -F
    let mut r = r_star;
    let mut w = 1.0 / beta;
    for i in one + 1..ss.len() {
        let wi = ss[i].powf(-beta) / beta;
        r = integrate_down(problem, r, w, wi, -1.0)?;
        w = wi;
        r_hat[i] = r;
    }

    let expo = -(problem.dim() as f64 - 1.0) / (problem.p() - 1.0);
    let r_hat_s: Vec<f64> = ss
        .iter()
        .zip(&r_hat)
        .map(|(&s, &r)| shooting_rhs(problem, r) * s.powf(expo))
        .collect();
    let h = std::f64::consts::LN_10 / pd;
    let mut plug_back: f64 = 0.0;
    for i in 2..ss.len().saturating_sub(2) {
        let d = (-r_hat[i + 2] + 8.0 * r_hat[i + 1] - 8.0 * r_hat[i - 1] + r_hat[i - 2]) / (12.0 * h);
        let rel = (d / ss[i] - r_hat_s[i]).abs() / r_hat_s[i];
        plug_back = plug_back.max(rel);
    }
    let p = problem.p();
    let samples: Vec<TransformSample> = (0..ss.len())
        .filter(|&i| (i as i64 + k_lo).rem_euclid(opts.thin as i64) == 0 || i == 0 || i + 1 == ss.len())
        .map(|i| TransformSample {
            s: ss[i],
            r_hat: r_hat[i],
            r_hat_s: r_hat_s[i],
            rho: r_hat_s[i].powf(p),
        })
        .collect();
    Ok(TransformResult {
        r_star,
        beta,
        shooting_error,
        anchor: r_hat[one],
        rho_at_zero: (shooting_rhs(problem, r_probe) * s_probe.powf(expo)).powf(p),
        plug_back_residual: plug_back,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub band: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub window: (f64, f64),
    pub bound_factor: f64,
    pub series: Vec<RatioSeries>,
    /// Largest relative gap in `φ(r̂(s)) = s^{-β}/β`, `φ(r) = ∫_r^∞ 1/F`.
    pub round_trip_residual: f64,
    pub derivative_ratio: InequalityRecord,
    pub pass: bool,
}

pub const DEFAULT_BOUND_FACTOR: f64 = 10.0;

fn series(name: &str, values: &[f64], bound: f64) -> RatioSeries {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let band = max / min;
    RatioSeries {
        name: name.into(),
        min,
        max,
        band,
        pass: min > 0.0 && band <= bound,
    }
}

/// `φ̃(r) = r / (g(r) F(r))`.
pub fn phi_tilde(problem: &ProblemSpec, r: f64) -> f64 {
    r / (problem.weight().g(r) * shooting_rhs(problem, r))
}

/// `φ̃'/φ' = (r/g){g'/g - 1/r + (g' + (N-1)/r)/(p-1)}` with `φ' = -1/F`.
pub fn derivative_ratio(problem: &ProblemSpec, r: f64) -> f64 {
    let w = problem.weight();
    let (g, g1) = (w.g(r), w.g_prime(r));
    let nm1 = problem.dim() as f64 - 1.0;
    r / g * (g1 / g - 1.0 / r + (g1 + nm1 / r) / (problem.p() - 1.0))
}

/// Ratio diagnostics for the asymptotic equivalences of `r̂`, `ρ` and `φ̃`.
pub fn asymptotics_report(result: &TransformResult, calc: &EnvelopeCalculus, bound_factor: f64) -> Result<AsymptoticsReport> {
    let problem = calc.problem();
    let s_top = result.samples.last().map(|x| x.s).unwrap_or(0.0);
    if s_top < 1e6 * (1.0 - 1e-12) {
        return Err(Error::Config(format!("transform samples end at s = {s_top}; need s >= 1e6")));
    }
    let window = (1e3, s_top.min(1e8));
    let p = problem.p();
    let w = problem.weight();
    let beta = result.beta;
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for x in result.samples.iter().filter(|x| x.s >= window.0 * (1.0 - 1e-12) && x.s <= window.1 * (1.0 + 1e-12)) {
        let ls = x.s.ln();
        let gi = w.g_inverse(ls);
        a.push(x.r_hat / gi);
        b.push(x.rho * x.s.powf(p) * ls.powf(p) / gi.powf(p));
        c.push(phi_tilde(problem, x.r_hat) * x.s.powf(beta));
    }
    let series = vec![
        series("r_hat_over_ginv_log_s", &a, bound_factor),
        series("rho_scaled", &b, bound_factor),
        series("phi_tilde_scaled", &c, bound_factor),
    ];
    let mut round_trip: f64 = 0.0;
    let (a1, a2) = (w.alpha1(), w.alpha2());
    let nm1 = problem.dim() as f64 - 1.0;
    let mut der = InequalityRecord::tracker("derivative_ratio", 1e-10);
    for x in &result.samples {
        let phi = blowup_time(problem, x.r_hat)?;
        let expect = x.s.powf(-beta) / beta;
        round_trip = round_trip.max((phi - expect).abs() / expect);
        let g = w.g(x.r_hat);
        der.check(
            x.r_hat,
            a1 / (p - 1.0),
            derivative_ratio(problem, x.r_hat),
            a2 / (p - 1.0) + (a2 - 1.0 + nm1 / (p - 1.0)) / g,
        );
    }
    let derivative_ratio = der.finish();
    let pass = series.iter().all(|s| s.pass) && round_trip <= 1e-3 && derivative_ratio.pass;
    Ok(AsymptoticsReport {
        window,
        bound_factor,
        series,
        round_trip_residual: round_trip,
        derivative_ratio,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightSpec;
    use approx::assert_relative_eq;

    fn reference() -> ProblemSpec {
        ProblemSpec::new(3, 2.0, 2.0, WeightSpec::power(1.0).unwrap()).unwrap()
    }

    #[test]
    fn blowup_time_is_e2_at_one() {
        // ∫_1^∞ e^{-r} r^{-2} dr = E₂(1) = e^{-1} - E₁(1)
        let e1 = 0.219_383_934_395_520_3;
        let v = blowup_time(&reference(), 1.0).unwrap();
        assert_relative_eq!(v, (-1f64).exp() - e1, max_relative = 1e-11);
    }

    #[test]
    fn blowup_time_decreases() {
        let pr = reference();
        let xs = [0.05, 0.2, 1.0, 3.0];
        let zs: Vec<f64> = xs.iter().map(|&r| blowup_time(&pr, r).unwrap()).collect();
        assert!(zs.windows(2).all(|w| w[1] < w[0]));
        assert!(blowup_time(&pr, 0.0).is_err());
    }

    #[test]
    fn shooting_hits_target() {
        let pr = reference();
        let r = shoot_r_star(&pr).unwrap();
        assert_relative_eq!(blowup_time(&pr, r).unwrap(), 1.0, max_relative = 1e-10);
        // independent check: z₁(x) = E₂(x)/x = (e^{-x} - x E₁(x))/x with the
        // convergent series E₁(x) = -γ - ln x - Σ (-x)^k/(k k!)
        let e1 = {
            let mut sum = 0.0;
            let mut term = 1.0;
            for k in 1..60 {
                term *= -r / k as f64;
                sum += term / k as f64;
            }
            -0.577_215_664_901_532_9 - r.ln() - sum
        };
        assert_relative_eq!(((-r).exp() - r * e1) / r, 1.0, max_relative = 1e-10);
        assert_relative_eq!(r, 0.393774, epsilon = 1e-6);
    }

    #[test]
    fn derivative_ratio_matches_differences() {
        let pr = ProblemSpec::new(3, 2.0, 2.0, WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap()).unwrap();
        for r in [0.3, 2.0, 15.0] {
            let h = 1e-6 * r;
            let dphit = (phi_tilde(&pr, r + h) - phi_tilde(&pr, r - h)) / (2.0 * h);
            let dphi = -1.0 / shooting_rhs(&pr, r);
            assert_relative_eq!(dphit / dphi, derivative_ratio(&pr, r), max_relative = 1e-6);
        }
    }
}

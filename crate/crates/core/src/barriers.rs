//! Explicit super- and subsolutions
//!
//! `ũ(r,t) = C* (t+t₀)^{-1/k} [E(τ)^{1/(p-1)} - J(r)^{1/(p-1)}]₊^{(p-1)/k}` for `r >= r₀`,
//! with `J^{1/(p-1)}` replaced by `I(r)` inside `r₀`, `τ = Γ log(t+t₀)` and
//! `k = p+m-3`. The selectors below pick `C*, Γ, t₀, r₀, ν₀` so that the
//! differential inequality holds; see the `residual` module for the check.

use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeCalculus;
use crate::error::{Error, Result};
use crate::numeric::{bisect_increasing, neg, pos};
use crate::weights::ProblemSpec;

/// Multiplier applied to every "large enough" threshold.
pub const SLACK_GROW: f64 = 1.05;
/// Multiplier applied to every "small enough" threshold.
pub const SLACK_SHRINK: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierKind {
    Super,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperMus {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubMus {
    pub mu1t: f64,
    pub mu2t: f64,
    pub mu3t: f64,
    pub mu4t: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuConstants {
    Super(SuperMus),
    Sub(SubMus),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub grow: f64,
    pub shrink: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Self {
            grow: SLACK_GROW,
            shrink: SLACK_SHRINK,
        }
    }
}

/// A complete constant set for one barrier.
///
/// `t0` is stored through its logarithm: for small `λ` the subsolution
/// shift `t₀` overflows `f64` long before `log t₀` becomes awkward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub kind: BarrierKind,
    pub c_star: f64,
    pub gamma: f64,
    pub log_t0: f64,
    pub r0: f64,
    pub nu0: f64,
    pub mus: MuConstants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub slack: Slack,
}

impl BarrierParams {
    pub fn t0(&self) -> f64 {
        self.log_t0.exp()
    }

    /// `log(t + t₀)` without forming `t₀`.
    #[inline]
    pub fn log_shifted(&self, t: f64) -> f64 {
        self.log_t0 + (t * (-self.log_t0).exp()).ln_1p()
    }
}

fn k_of(problem: &ProblemSpec) -> f64 {
    problem.p() + problem.m() - 3.0
}

/// `μ₁, μ₂, d, μ₃` of the supersolution.
pub fn super_mu_constants(calc: &EnvelopeCalculus) -> SuperMus {
    let pr = calc.problem();
    let (p, k) = (pr.p(), k_of(pr));
    let (a1, a2) = (calc.weight().alpha1(), calc.weight().alpha2());
    let ai = if p >= 2.0 { a1 } else { a2 };
    let mu1 = (p - a2).powf(p - 1.0) / k.powf(p - 2.0);
    let mu2 = (p - a1).powf(p) / k.powf(p - 1.0);
    let d = neg(calc.c1()) * (p - 1.0) * (p - ai).powf(p - 2.0);
    let mu3 = (pos(p - 2.0) * (p - a1).powf(p) + d) / k.powf(p - 2.0);
    SuperMus { mu1, mu2, mu3, d }
}

/// `μ̃₁, μ̃₂, d̃, μ̃₃, μ̃₄` of the subsolution.
pub fn sub_mu_constants(calc: &EnvelopeCalculus) -> SubMus {
    let pr = calc.problem();
    let (p, k) = (pr.p(), k_of(pr));
    let (a1, a2) = (calc.weight().alpha1(), calc.weight().alpha2());
    let ai = if p >= 2.0 { a1 } else { a2 };
    let mu1t = (p - a1).powf(p - 1.0) / k.powf(p - 2.0);
    let mu2t = (p - a2).powf(p) / k.powf(p - 1.0);
    let dt = pos(calc.c2()) * (p - 1.0) * (p - ai).powf(p - 2.0);
    let mu3t = (neg(p - 2.0) * (p - a1).powf(p) + dt) / k.powf(p - 2.0);
    let mu4t = 2f64.powf(-a2 * (p - 1.0) / (p - a2)) * mu2t * a1 / (p - a1);
    SubMus {
        mu1t,
        mu2t,
        mu3t,
        mu4t,
        dt,
    }
}

/// Supersolution: the two thresholds on `G(r₀)`.
fn super_r0_thresholds(calc: &EnvelopeCalculus, mus: &SuperMus) -> (f64, f64) {
    let p = calc.problem().p();
    let (a1, a2) = (calc.weight().alpha1(), calc.weight().alpha2());
    let t1 = 4.0 * mus.mu3 / (mus.mu1 * a1 * a1);
    let t2 = 2.0 * mus.mu2 * p * pos(a2 - 1.0) / (mus.mu1 * a1 * a1 * (p - a2));
    (t1, t2)
}

/// Supersolution: the upper bound on `C*^{-k}` at a given `G(r₀)`.
fn super_c_bound(calc: &EnvelopeCalculus, mus: &SuperMus, g_r0: f64) -> f64 {
    let pr = calc.problem();
    let (p, k, n) = (pr.p(), k_of(pr), pr.dim() as f64);
    let (a1, a2) = (calc.weight().alpha1(), calc.weight().alpha2());
    let first = mus.mu1 * a1 * a1 / 4.0;
    let second = (n - 1.0) * (p - a2).powf(p - 1.0) / (k.powf(p - 2.0) * g_r0);
    first.min(second)
}

/// Supersolution: left side of the `t₀` condition,
/// `(pν₀/k) r₀^{p/(p-1)}/G(r₀)^{1/(p-1)} + I(r₀)`.
fn super_t0_target(calc: &EnvelopeCalculus, r0: f64, nu0: f64) -> f64 {
    let pr = calc.problem();
    let (p, k) = (pr.p(), k_of(pr));
    let q = 1.0 / (p - 1.0);
    p * nu0 / k * r0.powf(p * q) / calc.big_g(r0).powf(q) + calc.cap_i(r0, r0, nu0)
}

/// Smallest `log t₀ > G(r₀)` with `E(log t₀)^{1/(p-1)}` at least `target`,
/// by bisection on `log t₀` with a geometrically expanded bracket.
fn solve_log_t0(calc: &EnvelopeCalculus, g_r0: f64, target: f64) -> Result<f64> {
    let q = 1.0 / (calc.problem().p() - 1.0);
    let f = |x: f64| calc.big_e(x).powf(q);
    let lo = g_r0 + 1e-6;
    if f(lo) >= target {
        return Ok(lo);
    }
    let mut hi = 1e3f64.max(2.0 * lo);
    let mut expansions = 0;
    while f(hi) < target {
        hi *= 10.0;
        expansions += 1;
        if expansions > 300 || !hi.is_finite() {
            return Err(Error::Construction("cannot bracket log t0".into()));
        }
    }
    Ok(bisect_increasing(f, lo, hi, target, 200))
}

fn super_from_r0(calc: &EnvelopeCalculus, mus: SuperMus, r0: f64) -> Result<BarrierParams> {
    let pr = calc.problem();
    let (p, k) = (pr.p(), k_of(pr));
    let a2 = calc.weight().alpha2();
    let g_r0 = calc.big_g(r0);
    let c_star = SLACK_GROW * super_c_bound(calc, &mus, g_r0).powf(-1.0 / k);
    let nu0 = calc.matching_nu0(r0);
    let gamma = (mus.mu2 * a2 * c_star.powf(k) / (p - a2)).max(1.0);
    let root = solve_log_t0(calc, g_r0, super_t0_target(calc, r0, nu0))?;
    let params = BarrierParams {
        kind: BarrierKind::Super,
        c_star,
        gamma,
        log_t0: SLACK_GROW * root,
        r0,
        nu0,
        mus: MuConstants::Super(mus),
        lambda: None,
        slack: Slack::default(),
    };
    if !params.c_star.is_finite() || !params.log_t0.is_finite() {
        return Err(Error::Construction("non-finite supersolution constants".into()));
    }
    Ok(params)
}

fn super_plain_r0(calc: &EnvelopeCalculus, mus: &SuperMus) -> f64 {
    let (t1, t2) = super_r0_thresholds(calc, mus);
    let threshold = t1.max(t2);
    if threshold > 0.0 {
        calc.big_g_inverse(SLACK_GROW * threshold)
    } else {
        calc.big_g_inverse(1.0)
    }
}

/// Constant selection for the supersolution.
pub fn select_super(calc: &EnvelopeCalculus) -> Result<BarrierParams> {
    let mus = super_mu_constants(calc);
    let r0 = super_plain_r0(calc, &mus);
    super_from_r0(calc, mus, r0)
}

/// Supersolution lying above `M` on `|x| <= L` at `t = 0`.
///
/// Takes `r₀ >= L`, then enlarges `Γ` until
/// `E(Γ log t₀)^{1/(p-1)} >= (M t₀^{1/k}/C*)^{k/(p-1)} + J(r₀)^{1/(p-1)}`;
/// since `I <= J(r₀)^{1/(p-1)}` on `r <= r₀`, this bounds `ũ(·,0)` from below
/// by `M` there. `E` is inverted exactly rather than through its power-law
/// minorant, which is only valid for arguments where `G⁻¹ >= 1`.
pub fn fit_super_above(calc: &EnvelopeCalculus, m_level: f64, l_radius: f64) -> Result<BarrierParams> {
    if !(m_level > 0.0 && l_radius > 0.0) {
        return Err(Error::Construction("M and L must be positive".into()));
    }
    let mus = super_mu_constants(calc);
    let r0 = super_plain_r0(calc, &mus).max(l_radius);
    let mut params = super_from_r0(calc, mus, r0)?;
    let pr = calc.problem();
    let (p, k) = (pr.p(), k_of(pr));
    let q = 1.0 / (p - 1.0);
    // (M t0^{1/k} / C*)^{k/(p-1)} in log form
    let lift = ((m_level.ln() + params.log_t0 / k - params.c_star.ln()) * k * q).exp();
    let need = lift + calc.big_j(r0).powf(q);
    let tau_star = calc.big_e_inverse(need.powf(p - 1.0));
    params.gamma = params.gamma.max(SLACK_GROW * tau_star / params.log_t0);
    Ok(params)
}

/// Constant selection for the subsolution with scale `λ`.
///
/// The `t₀` threshold involves `(ν₀p)^{p-1}` before `r₀` is known; it is
/// replaced by its upper bound `(p-α₁)^{p-1}` (exact for power weights).
pub fn select_sub(calc: &EnvelopeCalculus, lambda: f64) -> Result<BarrierParams> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Construction(format!("lambda = {lambda} must be positive")));
    }
    let mus = sub_mu_constants(calc);
    let pr = calc.problem();
    let (p, k, n) = (pr.p(), k_of(pr), pr.dim() as f64);
    let (a1, a2) = (calc.weight().alpha1(), calc.weight().alpha2());
    let kp2 = k.powf(p - 2.0);
    let nu_p_bound = (p - a1).powf(p - 1.0);
    let log_t0 = SLACK_GROW
        * [
            4.0 * (p - a1) / a1,
            1.0 / mus.mu4t,
            // 2μ̃₃, not μ̃₃: the limit of G(r₀)C*^{-k} as r₀ -> 0 carries the factor 2
            (2.0 * mus.mu1t * (n - 1.0) + 2.0 * mus.mu3t + 2.0 * mus.mu1t * a2 * a2) / mus.mu4t,
            2.0 * nu_p_bound * (n + a2 * a2) / (mus.mu4t * kp2),
        ]
        .into_iter()
        .fold(0.0, f64::max);

    let lam_k = lambda.powf(k);
    let mut g_r0 = SLACK_SHRINK * lam_k.min(1.0);
    for _ in 0..200 {
        if !(g_r0 > 0.0) {
            break;
        }
        let r0 = calc.big_g_inverse(g_r0);
        let nu0 = calc.matching_nu0(r0);
        let c_inv = SLACK_GROW * sub_c_inv_terms(calc, &mus, lambda, g_r0, nu0).into_iter().fold(0.0, f64::max);
        if g_r0 * c_inv < mus.mu4t * log_t0 {
            let gamma = 2f64.powf(a2 * (p - 1.0) / (p - a2)) * g_r0 / log_t0;
            return Ok(BarrierParams {
                kind: BarrierKind::Sub,
                c_star: c_inv.powf(-1.0 / k),
                gamma,
                log_t0,
                r0,
                nu0,
                mus: MuConstants::Sub(mus),
                lambda: Some(lambda),
                slack: Slack::default(),
            });
        }
        g_r0 *= 0.5;
    }
    Err(Error::Construction(
        "no matching radius satisfies G(r0) C*^-k < mu4t log t0".into(),
    ))
}

/// The three entries whose maximum defines `C*^{-k}` for the subsolution.
fn sub_c_inv_terms(calc: &EnvelopeCalculus, mus: &SubMus, lambda: f64, g_r0: f64, nu0: f64) -> [f64; 3] {
    let pr = calc.problem();
    let (p, k, n) = (pr.p(), k_of(pr), pr.dim() as f64);
    let a2 = calc.weight().alpha2();
    [
        lambda.powf(-k),
        2.0 * (mus.mu1t * (n - 1.0) + mus.mu3t) / g_r0 + 2.0 * mus.mu1t * a2 * a2,
        2.0 * (nu0 * p).powf(p - 1.0) * (n + a2 * a2 * g_r0) / (k.powf(p - 2.0) * g_r0),
    ]
}

/// Subsolution whose initial trace is supported in `|x| <= ell` and
/// bounded by `eps`, found by shrinking `λ`.
pub fn fit_sub_below(calc: &EnvelopeCalculus, eps: f64, ell: f64) -> Result<BarrierParams> {
    if !(eps > 0.0 && ell > 0.0) {
        return Err(Error::Construction("eps and ell must be positive".into()));
    }
    let fits = |params: &BarrierParams| {
        let b = Barrier::new(params, calc);
        b.support_radius(0.0) <= ell && b.eval(0.0, 0.0) <= eps
    };
    let mut lambda = 1.0;
    let mut params = select_sub(calc, lambda)?;
    if fits(&params) {
        return Ok(params);
    }
    let mut failing = lambda;
    loop {
        lambda *= 0.5;
        if lambda < 1e-300 {
            return Err(Error::Construction("lambda search underflowed".into()));
        }
        params = select_sub(calc, lambda)?;
        if fits(&params) {
            break;
        }
        failing = lambda;
    }
    // tighten towards the largest admissible lambda
    let (mut lo, mut hi) = (lambda.ln(), failing.ln());
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let trial = select_sub(calc, mid.exp())?;
        if fits(&trial) {
            lo = mid;
            params = trial;
        } else {
            hi = mid;
        }
    }
    Ok(params)
}

/// Evaluator bound to one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct Barrier<'a> {
    pub params: &'a BarrierParams,
    pub calc: &'a EnvelopeCalculus,
    pub(crate) k: f64,
    pub(crate) q: f64,
    pub(crate) g_r0: f64,
    pub(crate) jq_r0: f64,
}

/// Time-dependent factors of the barrier at a fixed `t`.
#[derive(Debug, Clone, Copy)]
pub struct TimeSlice {
    pub t: f64,
    /// `log(t + t₀)`
    pub log_shifted: f64,
    pub tau: f64,
    /// `E(τ)^{1/(p-1)}`
    pub e_q: f64,
    /// `C*(t+t₀)^{-1/k}`
    pub amplitude: f64,
}

impl<'a> Barrier<'a> {
    pub fn new(params: &'a BarrierParams, calc: &'a EnvelopeCalculus) -> Self {
        let pr = calc.problem();
        let k = k_of(pr);
        let q = 1.0 / (pr.p() - 1.0);
        Self {
            params,
            calc,
            k,
            q,
            g_r0: calc.big_g(params.r0),
            jq_r0: calc.big_j(params.r0).powf(q),
        }
    }

    pub fn slice(&self, t: f64) -> TimeSlice {
        let ls = self.params.log_shifted(t);
        let tau = self.params.gamma * ls;
        TimeSlice {
            t,
            log_shifted: ls,
            tau,
            e_q: self.calc.big_e(tau).powf(self.q),
            amplitude: self.params.c_star * (-ls / self.k).exp(),
        }
    }

    /// `J(r)^{1/(p-1)}` outside `r₀`, `I(r)` inside.
    pub fn profile(&self, r: f64) -> f64 {
        let pr = self.params;
        if r >= pr.r0 {
            self.calc.big_j(r).powf(self.q)
        } else {
            let p = self.calc.problem().p();
            pr.nu0 * (r.powf(p) / self.g_r0).powf(self.q) + (1.0 - pr.nu0) * self.jq_r0
        }
    }

    pub fn eval_at(&self, s: &TimeSlice, r: f64) -> f64 {
        let bracket = pos(s.e_q - self.profile(r));
        if bracket == 0.0 {
            return 0.0;
        }
        s.amplitude * bracket.powf((self.calc.problem().p() - 1.0) / self.k)
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        self.eval_at(&self.slice(t), r)
    }

    pub fn support_radius_at(&self, s: &TimeSlice) -> f64 {
        let edge = self.calc.big_g_inverse(s.tau);
        if edge >= self.params.r0 {
            return edge;
        }
        // the bracket closes inside r₀: solve I(r) = E(τ)^{1/(p-1)}
        let pr = self.params;
        let p = self.calc.problem().p();
        let rest = (s.e_q - (1.0 - pr.nu0) * self.jq_r0) / pr.nu0;
        if rest <= 0.0 {
            return 0.0;
        }
        (self.g_r0 * rest.powf(p - 1.0)).powf(1.0 / p).min(pr.r0)
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        self.support_radius_at(&self.slice(t))
    }
}

pub fn eval_barrier(params: &BarrierParams, calc: &EnvelopeCalculus, r: f64, t: f64) -> f64 {
    Barrier::new(params, calc).eval(r, t)
}

pub fn barrier_support_radius(params: &BarrierParams, calc: &EnvelopeCalculus, t: f64) -> f64 {
    Barrier::new(params, calc).support_radius(t)
}

/// One defining inequality of a parameter set, re-evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn le(name: &str, lhs: f64, rhs: f64) -> ConstraintCheck {
    ConstraintCheck {
        name: name.to_string(),
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-12) + 1e-300,
    }
}

fn lt(name: &str, lhs: f64, rhs: f64) -> ConstraintCheck {
    ConstraintCheck {
        name: name.to_string(),
        lhs,
        rhs,
        pass: lhs < rhs,
    }
}

/// Re-checks every defining inequality of `params` from scratch, using only
/// the problem data and the formulas, independently of the selectors.
pub fn check_params(params: &BarrierParams, calc: &EnvelopeCalculus) -> Vec<ConstraintCheck> {
    let pr = calc.problem();
    let (p, k, n) = (pr.p(), pr.p() + pr.m() - 3.0, pr.dim() as f64);
    let (a1, a2) = (calc.weight().alpha1(), calc.weight().alpha2());
    let q = 1.0 / (p - 1.0);
    let g_r0 = calc.big_g(params.r0);
    let c_k = params.c_star.powf(k);
    let nu0 = 1.0 - params.r0 * (calc.g(params.r0) / params.r0) / (p * g_r0);
    let mut out = vec![
        le("nu0 lower bracket", 1.0 - a2 / p, params.nu0),
        le("nu0 upper bracket", params.nu0, 1.0 - a1 / p),
        le("nu0 matches C1 matching", (params.nu0 - nu0).abs(), 1e-12),
    ];
    match (params.kind, params.mus) {
        (BarrierKind::Super, MuConstants::Super(mus)) => {
            let mu1 = (p - a2).powf(p - 1.0) / k.powf(p - 2.0);
            let mu2 = (p - a1).powf(p) / k.powf(p - 1.0);
            let ai = if p >= 2.0 { a1 } else { a2 };
            let d = (-calc.c1()).max(0.0) * (p - 1.0) * (p - ai).powf(p - 2.0);
            let mu3 = ((p - 2.0).max(0.0) * (p - a1).powf(p) + d) / k.powf(p - 2.0);
            out.push(le("mu constants reproduce", (mus.mu1 - mu1).abs() + (mus.mu2 - mu2).abs() + (mus.mu3 - mu3).abs(), 1e-12 * (mu1 + mu2 + mu3)));
            out.push(le("G(r0) >= 4 mu3/(mu1 a1^2)", 4.0 * mu3 / (mu1 * a1 * a1), g_r0));
            out.push(le(
                "G(r0) >= 2 mu2 p (a2-1)+/(mu1 a1^2 (p-a2))",
                2.0 * mu2 * p * (a2 - 1.0).max(0.0) / (mu1 * a1 * a1 * (p - a2)),
                g_r0,
            ));
            out.push(le("C*^-k <= mu1 a1^2/4", 1.0 / c_k, mu1 * a1 * a1 / 4.0));
            out.push(le(
                "C*^-k <= (N-1)(p-a2)^(p-1)/(k^(p-2) G(r0))",
                1.0 / c_k,
                (n - 1.0) * (p - a2).powf(p - 1.0) / (k.powf(p - 2.0) * g_r0),
            ));
            out.push(le("Gamma >= 1", 1.0, params.gamma));
            out.push(le("Gamma >= mu2 a2 C*^k/(p-a2)", mu2 * a2 * c_k / (p - a2), params.gamma));
            out.push(lt("G(r0) < log t0", g_r0, params.log_t0));
            let lhs = p * params.nu0 / k * params.r0.powf(p * q) / g_r0.powf(q) + calc.big_j(params.r0).powf(q);
            out.push(le("t0 condition", lhs, calc.big_e(params.log_t0).powf(q)));
        }
        (BarrierKind::Sub, MuConstants::Sub(mus)) => {
            let lambda = params.lambda.unwrap_or(f64::NAN);
            let mu1t = (p - a1).powf(p - 1.0) / k.powf(p - 2.0);
            let mu2t = (p - a2).powf(p) / k.powf(p - 1.0);
            let ai = if p >= 2.0 { a1 } else { a2 };
            let dt = calc.c2().max(0.0) * (p - 1.0) * (p - ai).powf(p - 2.0);
            let mu3t = ((2.0 - p).max(0.0) * (p - a1).powf(p) + dt) / k.powf(p - 2.0);
            let mu4t = (0.5f64).powf(a2 * (p - 1.0) / (p - a2)) * mu2t * a1 / (p - a1);
            out.push(le(
                "mu constants reproduce",
                (mus.mu1t - mu1t).abs() + (mus.mu2t - mu2t).abs() + (mus.mu3t - mu3t).abs() + (mus.mu4t - mu4t).abs(),
                1e-12 * (mu1t + mu2t + mu3t + mu4t),
            ));
            let nu_p = (params.nu0 * p).powf(p - 1.0);
            for (name, v) in [
                ("log t0 >= 4(p-a1)/a1", 4.0 * (p - a1) / a1),
                ("log t0 >= 1/mu4t", 1.0 / mu4t),
                ("log t0 >= (2 mu1t (N-1) + mu3t + 2 mu1t a2^2)/mu4t", (2.0 * mu1t * (n - 1.0) + mu3t + 2.0 * mu1t * a2 * a2) / mu4t),
                ("log t0 >= 2 (nu0 p)^(p-1) (N + a2^2)/(mu4t k^(p-2))", 2.0 * nu_p * (n + a2 * a2) / (mu4t * k.powf(p - 2.0))),
            ] {
                out.push(le(name, v, params.log_t0));
            }
            out.push(lt("G(r0) < 1", g_r0, 1.0));
            out.push(lt("G(r0) < lambda^k", g_r0, lambda.powf(k)));
            out.push(lt("G(r0) < mu4t C*^k log t0", g_r0, mu4t * c_k * params.log_t0));
            let c_terms = [
                lambda.powf(-k),
                2.0 * (mu1t * (n - 1.0) + mu3t) / g_r0 + 2.0 * mu1t * a2 * a2,
                2.0 * nu_p * (n + a2 * a2 * g_r0) / (k.powf(p - 2.0) * g_r0),
            ];
            out.push(le("C*^-k >= max of three terms", c_terms.into_iter().fold(0.0, f64::max), 1.0 / c_k));
            let gamma = 2f64.powf(a2 * (p - 1.0) / (p - a2)) * g_r0 / params.log_t0;
            out.push(le("Gamma = 2^(a2(p-1)/(p-a2)) G(r0)/log t0", (params.gamma - gamma).abs(), 1e-12 * gamma));
        }
        _ => out.push(ConstraintCheck {
            name: "kind matches mu constants".into(),
            lhs: 0.0,
            rhs: 0.0,
            pass: false,
        }),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightSpec;
    use approx::assert_relative_eq;

    fn calc(p: f64, m: f64, alpha: f64) -> EnvelopeCalculus {
        EnvelopeCalculus::new(ProblemSpec::new(3, p, m, WeightSpec::power(alpha).unwrap()).unwrap())
    }

    #[test]
    fn super_mus_reference_case() {
        let m = super_mu_constants(&calc(2.0, 2.0, 1.0));
        assert_eq!((m.mu1, m.mu2, m.mu3, m.d), (1.0, 1.0, 0.0, 0.0));
        let m = super_mu_constants(&calc(2.0, 2.0, 1.5));
        assert_relative_eq!(m.mu1, 0.5);
        assert_relative_eq!(m.mu2, 0.25);
    }

    #[test]
    fn sub_mus_reference_case() {
        let m = sub_mu_constants(&calc(2.0, 2.0, 1.0));
        assert_eq!((m.mu1t, m.mu2t, m.mu3t, m.dt), (1.0, 1.0, 0.0, 0.0));
        assert_relative_eq!(m.mu4t, 0.5);
    }

    #[test]
    fn super_reference_constants() {
        let c = calc(2.0, 2.0, 1.0);
        let s = select_super(&c).unwrap();
        assert_relative_eq!(s.r0, 1.0);
        assert_relative_eq!(s.nu0, 0.5);
        assert_relative_eq!(s.c_star, 4.0 * SLACK_GROW, max_relative = 1e-14);
        assert_relative_eq!(s.gamma, 4.0 * SLACK_GROW, max_relative = 1e-14);
        assert_relative_eq!(s.log_t0, 2.0 * SLACK_GROW, max_relative = 1e-9);
        assert!(check_params(&s, &c).iter().all(|x| x.pass));
    }

    #[test]
    fn super_threshold_for_alpha_above_one() {
        let c = calc(2.0, 2.0, 1.5);
        let mus = super_mu_constants(&c);
        let (_, t2) = super_r0_thresholds(&c, &mus);
        assert_relative_eq!(t2, 8.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn sub_reference_constants() {
        let c = calc(2.0, 2.0, 1.0);
        let s = select_sub(&c, 1.0).unwrap();
        assert_relative_eq!(s.log_t0, 16.0 * SLACK_GROW, max_relative = 1e-14);
        assert!(s.gamma < 1.0 / 8.0);
        assert!(check_params(&s, &c).iter().all(|x| x.pass), "{:?}", check_params(&s, &c));
    }

    #[test]
    fn unslacked_reference_value() {
        // C* = 4, Γ = 4, t0 = e², r0 = 1, ν0 = 1/2
        let c = calc(2.0, 2.0, 1.0);
        let mut s = select_super(&c).unwrap();
        s.c_star = 4.0;
        s.gamma = 4.0;
        s.log_t0 = 2.0;
        let v = eval_barrier(&s, &c, 0.0, 0.0);
        assert_relative_eq!(v, 30.0 * (-2f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(barrier_support_radius(&s, &c, 0.0), 8.0, max_relative = 1e-14);
    }

    #[test]
    fn continuity_at_matching_radius() {
        let c = calc(2.0, 2.0, 1.0);
        let s = select_super(&c).unwrap();
        let b = Barrier::new(&s, &c);
        let below = b.eval(s.r0 * (1.0 - 1e-15), 3.0);
        let at = b.eval(s.r0, 3.0);
        assert!((below - at).abs() <= 1e-13 * at);
    }

    #[test]
    fn corrupted_params_are_flagged() {
        let c = calc(2.0, 2.0, 1.0);
        let mut s = select_super(&c).unwrap();
        s.c_star *= 1e-2;
        assert!(check_params(&s, &c).iter().any(|x| !x.pass));
    }

    #[test]
    fn fitted_super_dominates_level() {
        let c = calc(2.0, 2.0, 1.0);
        let s = fit_super_above(&c, 1.0, 1.0).unwrap();
        assert_relative_eq!(s.gamma, 4.0 * SLACK_GROW, max_relative = 1e-12);
        let s = fit_super_above(&c, 50.0, 3.0).unwrap();
        let b = Barrier::new(&s, &c);
        for i in 0..=1000 {
            assert!(b.eval(3.0 * i as f64 / 1000.0, 0.0) >= 50.0);
        }
    }

    #[test]
    fn fitted_sub_fits_below() {
        let c = calc(2.0, 2.0, 1.0);
        let s = fit_sub_below(&c, 0.75, 0.5).unwrap();
        let b = Barrier::new(&s, &c);
        assert!(b.support_radius(0.0) <= 0.5);
        assert!(b.eval(0.0, 0.0) <= 0.75);
        assert!(check_params(&s, &c).iter().all(|x| x.pass));
    }

    #[test]
    fn params_json_round_trip() {
        let c = calc(2.0, 2.0, 1.0);
        for s in [select_super(&c).unwrap(), select_sub(&c, 1.0).unwrap()] {
            let text = serde_json::to_string(&s).unwrap();
            let back: BarrierParams = serde_json::from_str(&text).unwrap();
            assert_eq!(back, s);
        }
    }
}

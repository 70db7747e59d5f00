//! Derived calculus of the weight exponent.
//!
//! * `G(r) = ∫₀ʳ g(s)/s ds`, with `G' = g/r` and `r²G'' = r g' - g`
//! * `J(r) = r^p / G(r)`
//! * `E(τ) = J(G⁻¹(τ)) = G⁻¹(τ)^p / τ`
//! * `I(r) = ν₀ (r^p/G(r₀))^{1/(p-1)} + (1-ν₀) J(r₀)^{1/(p-1)}`
//!
//! For power weights every function has a closed form. For the other
//! families `G` is tabulated once on a geometric grid and evaluated as the
//! nearest tabulated value plus one short Gauss–Legendre panel, so lookups
//! carry quadrature accuracy rather than interpolation error.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numeric::{gauss16, gauss64, invert_increasing_positive, log_grid, pos};
use crate::weights::{InequalityRecord, ProblemSpec, WeightKind, WeightSpec};

const TABLE_LN_LO: f64 = -23.025850929940457; // ln 1e-10
const TABLE_LN_HI: f64 = 27.631021115928547; // ln 1e12
const TABLE_STEP: f64 = std::f64::consts::LN_2 / 4.0;

#[derive(Debug, Clone)]
struct GTable {
    values: Vec<f64>,
}

impl GTable {
    fn build(w: &WeightSpec) -> Self {
        let n = ((TABLE_LN_HI - TABLE_LN_LO) / TABLE_STEP).ceil() as usize + 1;
        let mut values = Vec::with_capacity(n);
        let mut acc = g_from_zero(w, TABLE_LN_LO.exp());
        values.push(acc);
        for k in 1..n {
            let a = TABLE_LN_LO + (k - 1) as f64 * TABLE_STEP;
            let b = TABLE_LN_LO + k as f64 * TABLE_STEP;
            acc += gauss64().integrate(a, b, |v| w.g(v.exp()));
            values.push(acc);
        }
        Self { values }
    }

    fn eval(&self, w: &WeightSpec, r: f64) -> f64 {
        let lr = r.ln();
        if lr < TABLE_LN_LO {
            return g_from_zero(w, r);
        }
        let k = (((lr - TABLE_LN_LO) / TABLE_STEP).floor() as usize).min(self.values.len() - 1);
        let mut base = TABLE_LN_LO + k as f64 * TABLE_STEP;
        let mut acc = self.values[k];
        // beyond the table: march whole panels
        while lr - base > TABLE_STEP {
            acc += gauss16().integrate(base, base + TABLE_STEP, |v| w.g(v.exp()));
            base += TABLE_STEP;
        }
        acc + gauss16().integrate(base, lr, |v| w.g(v.exp()))
    }
}

/// `∫₀ʳ g(s)/s ds` through `s = r e^{-u}`, which turns the integrable
/// endpoint singularity into an exponentially decaying tail in `u`.
fn g_from_zero(w: &WeightSpec, r: f64) -> f64 {
    let rule = gauss64();
    let mut total = rule.integrate(0.0, 1.0, |u| w.g(r * (-u).exp()));
    let mut lo = 1.0;
    while lo < 4096.0 {
        let piece = rule.integrate(lo, 2.0 * lo, |u| w.g(r * (-u).exp()));
        total += piece;
        lo *= 2.0;
        if piece <= 1e-18 * total {
            break;
        }
    }
    total
}

/// Derived functions `G, G⁻¹, J, E, I` for one problem, with the sandwich
/// constants `η₁, η₂` (for `r²G''`) and `c₁, c₂` (for `J''`).
#[derive(Debug, Clone)]
pub struct EnvelopeCalculus {
    problem: ProblemSpec,
    table: Option<GTable>,
    eta1: f64,
    eta2: f64,
    c1: f64,
    c2: f64,
}

impl EnvelopeCalculus {
    pub fn new(problem: ProblemSpec) -> Self {
        let w = *problem.weight();
        let table = match w.kind() {
            WeightKind::Power { .. } => None,
            WeightKind::Zygmund { .. } => Some(GTable::build(&w)),
        };
        let (eta1, eta2) = eta_constants(w.alpha1(), w.alpha2());
        let (c1, c2) = c_constants(problem.p(), w.alpha1(), w.alpha2());
        Self {
            problem,
            table,
            eta1,
            eta2,
            c1,
            c2,
        }
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn weight(&self) -> &WeightSpec {
        self.problem.weight()
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    #[inline]
    pub fn g(&self, r: f64) -> f64 {
        self.weight().g(r)
    }

    /// `G(r)` for `r > 0`.
    pub fn big_g(&self, r: f64) -> f64 {
        match (self.weight().kind(), &self.table) {
            (WeightKind::Power { alpha }, _) => {
                if alpha == 1.0 {
                    r
                } else {
                    r.powf(alpha) / alpha
                }
            }
            (_, Some(t)) => t.eval(self.weight(), r),
            (_, None) => g_from_zero(self.weight(), r),
        }
    }

    /// `G'(r) = g(r)/r`.
    #[inline]
    pub fn big_g_prime(&self, r: f64) -> f64 {
        self.g(r) / r
    }

    /// `G''(r) = g'(r)/r - g(r)/r²`.
    #[inline]
    pub fn big_g_second(&self, r: f64) -> f64 {
        let w = self.weight();
        (r * w.g_prime(r) - w.g(r)) / (r * r)
    }

    /// `G⁻¹(τ)` for `τ > 0`.
    pub fn big_g_inverse(&self, tau: f64) -> f64 {
        match self.weight().kind() {
            WeightKind::Power { alpha } => {
                if alpha == 1.0 {
                    tau
                } else {
                    (alpha * tau).powf(1.0 / alpha)
                }
            }
            WeightKind::Zygmund { .. } => {
                let a1 = self.weight().alpha1();
                let seed = (a1 * tau).powf(1.0 / a1);
                invert_increasing_positive(|r| self.big_g(r), tau, seed, 80)
                    .expect("G is continuous, increasing and unbounded")
            }
        }
    }

    /// `J(r) = r^p / G(r)`.
    #[inline]
    pub fn big_j(&self, r: f64) -> f64 {
        r.powf(self.problem.p()) / self.big_g(r)
    }

    /// `J'(r) = (J/r)(p - rG'/G)`.
    pub fn big_j_prime(&self, r: f64) -> f64 {
        let gg = self.big_g(r);
        let j = r.powf(self.problem.p()) / gg;
        j / r * (self.problem.p() - self.g(r) / gg)
    }

    /// `J''(r) = (J/r²)[p(p-1) - 2p x - y + 2x²]` with `x = rG'/G`, `y = r²G''/G`.
    pub fn big_j_second(&self, r: f64) -> f64 {
        let p = self.problem.p();
        let gg = self.big_g(r);
        let j = r.powf(p) / gg;
        let x = self.g(r) / gg;
        let y = r * r * self.big_g_second(r) / gg;
        j / (r * r) * (p * (p - 1.0) - 2.0 * p * x - y + 2.0 * x * x)
    }

    /// `(J, J', J'')` at `r`, sharing one evaluation of `G`.
    pub fn j_derivatives(&self, r: f64) -> (f64, f64, f64) {
        let p = self.problem.p();
        let gg = self.big_g(r);
        let j = r.powf(p) / gg;
        let x = self.g(r) / gg;
        let y = r * r * self.big_g_second(r) / gg;
        let j1 = j / r * (p - x);
        let j2 = j / (r * r) * (p * (p - 1.0) - 2.0 * p * x - y + 2.0 * x * x);
        (j, j1, j2)
    }

    /// `E(τ) = G⁻¹(τ)^p / τ`.
    pub fn big_e(&self, tau: f64) -> f64 {
        self.big_g_inverse(tau).powf(self.problem.p()) / tau
    }

    /// Inverse of the increasing function `E`.
    pub fn big_e_inverse(&self, e: f64) -> f64 {
        let a1 = self.weight().alpha1();
        let p = self.problem.p();
        // power-law surrogate of E, only used to seed the bracket
        let seed = e.powf(a1 / (p - a1)).max(1e-300);
        invert_increasing_positive(|tau| self.big_e(tau), e, seed, 200)
            .expect("E is continuous and increasing from 0 to infinity")
    }

    /// `I(r)` for matching radius `r0` and coefficient `nu0`.
    pub fn cap_i(&self, r: f64, r0: f64, nu0: f64) -> f64 {
        let q = 1.0 / (self.problem.p() - 1.0);
        let g0 = self.big_g(r0);
        nu0 * (r.powf(self.problem.p()) / g0).powf(q) + (1.0 - nu0) * self.big_j(r0).powf(q)
    }

    /// `I'(r) = ν₀ p/(p-1) r^{1/(p-1)} / G(r₀)^{1/(p-1)}`.
    pub fn cap_i_prime(&self, r: f64, r0: f64, nu0: f64) -> f64 {
        let p = self.problem.p();
        let q = 1.0 / (p - 1.0);
        nu0 * p * q * (r / self.big_g(r0)).powf(q)
    }

    /// `φ_J(r) = J(r)^{1/(p-1)} (δ₁ + δ₂/G(r))`.
    pub fn phi_j(&self, r: f64, delta1: f64, delta2: f64) -> f64 {
        let q = 1.0 / (self.problem.p() - 1.0);
        self.big_j(r).powf(q) * (delta1 + delta2 / self.big_g(r))
    }

    /// The `C¹`-matching coefficient `ν₀ = 1 - r₀G'(r₀)/(pG(r₀))`.
    pub fn matching_nu0(&self, r0: f64) -> f64 {
        1.0 - self.g(r0) / (self.problem.p() * self.big_g(r0))
    }
}

/// `(η₁, η₂)` by the case split on `α₁, α₂` against 1.
pub fn eta_constants(a1: f64, a2: f64) -> (f64, f64) {
    let eta1 = if a1 < 1.0 { (a1 - 1.0) * a2 } else { (a1 - 1.0) * a1 };
    let eta2 = if a2 < 1.0 { (a2 - 1.0) * a1 } else { (a2 - 1.0) * a2 };
    (eta1, eta2)
}

/// `(c₁, c₂)` by the four-case table.
pub fn c_constants(p: f64, a1: f64, a2: f64) -> (f64, f64) {
    let c1 = if a2 >= 1.0 {
        p * (p - 1.0 - 2.0 * a2) + 2.0 * a1 * a1 - a2 * (a2 - 1.0)
    } else {
        p * (p - 1.0 - 2.0 * a2) + 2.0 * a1 * a1 - a1 * (a2 - 1.0)
    };
    let c2 = if a1 >= 1.0 {
        p * (p - 1.0 - 2.0 * a1) + 2.0 * a2 * a2 - a1 * (a1 - 1.0)
    } else {
        p * (p - 1.0 - 2.0 * a1) + 2.0 * a2 * a2 - a2 * (a1 - 1.0)
    };
    (c1, c2)
}

fn check_r(func: &'static str, r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(domain(func, format!("argument {r} must be positive and finite")))
    }
}

pub fn big_g(calc: &EnvelopeCalculus, r: f64) -> Result<f64> {
    check_r("big_G", r)?;
    Ok(calc.big_g(r))
}

pub fn big_g_inverse(calc: &EnvelopeCalculus, tau: f64) -> Result<f64> {
    check_r("big_G_inverse", tau)?;
    Ok(calc.big_g_inverse(tau))
}

pub fn big_j(calc: &EnvelopeCalculus, r: f64) -> Result<f64> {
    check_r("big_J", r)?;
    Ok(calc.big_j(r))
}

pub fn big_j_prime(calc: &EnvelopeCalculus, r: f64) -> Result<f64> {
    check_r("big_J_prime", r)?;
    Ok(calc.big_j_prime(r))
}

pub fn big_j_second(calc: &EnvelopeCalculus, r: f64) -> Result<f64> {
    check_r("big_J_second", r)?;
    Ok(calc.big_j_second(r))
}

pub fn big_e(calc: &EnvelopeCalculus, tau: f64) -> Result<f64> {
    check_r("big_E", tau)?;
    Ok(calc.big_e(tau))
}

pub fn cap_i(calc: &EnvelopeCalculus, r: f64, r0: f64, nu0: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(domain("cap_I", format!("r = {r} must be nonnegative")));
    }
    check_r("cap_I", r0)?;
    if !(nu0 > 0.0 && nu0 < 1.0) {
        return Err(domain("cap_I", format!("nu0 = {nu0} must lie in (0, 1)")));
    }
    Ok(calc.cap_i(r, r0, nu0))
}

/// Radius beyond which `φ_J` is nondecreasing:
/// `G(r₁) = (δ₂/δ₁) p(α₂-1)₊/(p-α₂)`, and `r₁ = 0` when `α₂ <= 1`.
pub fn phi_monotone_radius(calc: &EnvelopeCalculus, delta1: f64, delta2: f64) -> Result<f64> {
    if !(delta1 > 0.0 && delta2 > 0.0) {
        return Err(domain("phi_monotone_radius", "deltas must be positive"));
    }
    let p = calc.problem().p();
    let a2 = calc.weight().alpha2();
    let target = delta2 / delta1 * p * pos(a2 - 1.0) / (p - a2);
    if target == 0.0 {
        return Ok(0.0);
    }
    Ok(calc.big_g_inverse(target))
}

/// Per-inequality outcomes of the envelope lemma checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub records: Vec<InequalityRecord>,
    pub eta1: f64,
    pub eta2: f64,
    pub c1: f64,
    pub c2: f64,
    pub tol_rel: f64,
    pub pass: bool,
}

/// Tolerance for closed-form weights.
pub const LEMMA_TOL_CLOSED: f64 = 1e-8;
/// Tolerance for quadrature-backed weights.
pub const LEMMA_TOL_QUADRATURE: f64 = 1e-6;

impl EnvelopeCalculus {
    pub fn default_lemma_tol(&self) -> f64 {
        match self.weight().kind() {
            WeightKind::Power { .. } => LEMMA_TOL_CLOSED,
            _ => LEMMA_TOL_QUADRATURE,
        }
    }
}

/// Evaluates the envelope sandwich inequalities on `grid`:
/// `g/α₂ <= G <= g/α₁`, `α₁G/r <= G' <= α₂G/r`, `η₁G <= r²G'' <= η₂G`,
/// `(p-α₂)J/r <= J' <= (p-α₁)J/r`, `c₁J/r² <= J'' <= c₂J/r²`, and the
/// scaling bounds `λ^{1/α₂}G⁻¹(τ) <= G⁻¹(λτ) <= λ^{1/α₁}G⁻¹(τ)` over all
/// ordered pairs of grid values read as `τ`.
pub fn lemma_suite(calc: &EnvelopeCalculus, grid: &[f64], tol_rel: f64) -> LemmaReport {
    let p = calc.problem().p();
    let (a1, a2) = (calc.weight().alpha1(), calc.weight().alpha2());
    let mut excf = InequalityRecord::tracker("excf_g_over_alpha", tol_rel);
    let mut excf_d = InequalityRecord::tracker("excf_g_prime", tol_rel);
    let mut excf2 = InequalityRecord::tracker("excf2_g_second", tol_rel);
    let mut rat = InequalityRecord::tracker("rat_j_prime", tol_rel);
    let mut rat2 = InequalityRecord::tracker("rat_j_second", tol_rel);
    for &r in grid {
        let gg = calc.big_g(r);
        let g = calc.g(r);
        excf.check(r, g / a2, gg, g / a1);
        excf_d.check(r, a1 * gg / r, calc.big_g_prime(r), a2 * gg / r);
        excf2.check(r, calc.eta1 * gg, r * r * calc.big_g_second(r), calc.eta2 * gg);
        let (j, j1, j2) = calc.j_derivatives(r);
        rat.check(r, (p - a2) * j / r, j1, (p - a1) * j / r);
        rat2.check(r, calc.c1 * j / (r * r), j2, calc.c2 * j / (r * r));
    }
    let mut inv_scaling = InequalityRecord::tracker("g_inverse_scaling", tol_rel);
    let inv: Vec<f64> = grid.iter().map(|&t| calc.big_g_inverse(t).ln()).collect();
    for i in 0..grid.len() {
        for j in i..grid.len() {
            let ll = (grid[j] / grid[i]).ln();
            inv_scaling.check_log(grid[i], ll / a2, inv[j] - inv[i], ll / a1);
        }
    }
    let records = vec![
        excf.finish(),
        excf_d.finish(),
        excf2.finish(),
        rat.finish(),
        rat2.finish(),
        inv_scaling.finish(),
    ];
    let pass = records.iter().all(|r| r.pass);
    LemmaReport {
        records,
        eta1: calc.eta1,
        eta2: calc.eta2,
        c1: calc.c1,
        c2: calc.c2,
        tol_rel,
        pass,
    }
}

/// Default lemma grid: `10⁻⁶ ..= 10⁶`, 20 points per decade.
pub fn lemma_grid() -> Vec<f64> {
    log_grid(1e-6, 1e6, 241)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn calc(p: f64, m: f64, w: WeightSpec) -> EnvelopeCalculus {
        EnvelopeCalculus::new(ProblemSpec::new(3, p, m, w).unwrap())
    }

    #[test]
    fn power_closed_forms() {
        let c = calc(2.0, 2.0, WeightSpec::power(1.0).unwrap());
        assert_eq!(big_g(&c, 2.0).unwrap(), 2.0);
        assert_eq!(big_g_inverse(&c, 5.0).unwrap(), 5.0);
        assert_eq!(c.big_j(3.0), 3.0);
        assert_eq!(c.big_j_prime(3.0), 1.0);
        assert_eq!(c.big_j_second(3.0), 0.0);
        assert_eq!(big_e(&c, 7.0).unwrap(), 7.0);
        let c15 = calc(2.0, 2.0, WeightSpec::power(1.5).unwrap());
        assert_relative_eq!(c15.big_g(3.0), 3f64.powf(1.5) / 1.5, max_relative = 1e-15);
        // with p = 2, alpha = 1.5: J = 1.5 r^{0.5}, J' = 0.75 r^{-0.5}
        assert_relative_eq!(c15.big_j(4.0), 3.0, max_relative = 1e-14);
        assert_relative_eq!(c15.big_j_prime(4.0), 0.375, max_relative = 1e-14);
    }

    #[test]
    fn square_power_inverse() {
        let c = EnvelopeCalculus::new(ProblemSpec::new(4, 2.5, 2.0, WeightSpec::power(2.0).unwrap()).unwrap());
        assert_relative_eq!(c.big_g(3.0), 4.5, max_relative = 1e-15);
        assert_relative_eq!(c.big_g_inverse(2.0), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn cap_i_identities() {
        let c = calc(2.0, 2.0, WeightSpec::power(1.0).unwrap());
        for r in [0.0, 0.5, 1.0, 2.0] {
            assert_relative_eq!(cap_i(&c, r, 1.0, 0.5).unwrap(), 0.5 * r * r + 0.5, max_relative = 1e-15);
        }
        let z = calc(2.0, 2.0, WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap());
        for nu0 in [0.1, 0.5, 0.9] {
            let i0 = z.cap_i(1.3, 1.3, nu0);
            assert_relative_eq!(i0, z.big_j(1.3), max_relative = 1e-14);
        }
        assert!(cap_i(&c, 1.0, 1.0, 1.0).is_err());
        assert!(cap_i(&c, -1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn eta_and_c_tables() {
        assert_eq!(eta_constants(1.0, 1.0), (0.0, 0.0));
        assert_eq!(eta_constants(0.5, 0.5), (-0.25, -0.25));
        assert_eq!(c_constants(2.0, 1.0, 1.0), (0.0, 0.0));
        // alpha2 < 1 / alpha1 < 1 branches
        let (c1, c2) = c_constants(2.0, 0.5, 0.5);
        assert_relative_eq!(c1, 2.0 * 0.0 + 0.5 - 0.5 * (-0.5));
        assert_relative_eq!(c2, 2.0 * 0.0 + 0.5 - 0.5 * (-0.5));
    }

    #[test]
    fn power_half_second_derivative_is_exact() {
        let c = calc(2.0, 2.0, WeightSpec::power(0.5).unwrap());
        for r in [1e-3, 1.0, 50.0] {
            assert_relative_eq!(r * r * c.big_g_second(r), -0.25 * c.big_g(r), max_relative = 1e-14);
        }
    }

    #[test]
    fn zygmund_table_is_continuous_across_nodes() {
        let c = calc(2.0, 2.0, WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap());
        let node = (TABLE_LN_LO + 40.0 * TABLE_STEP).exp();
        let lo = c.big_g(node * (1.0 - 1e-12));
        let hi = c.big_g(node * (1.0 + 1e-12));
        assert!(hi > lo);
        assert!((hi - lo) / lo < 1e-10);
        // below the table uses the direct substitution
        let tiny: f64 = 1e-12;
        let expected = 2.0 * tiny.sqrt() * (2.0f64).ln().sqrt();
        assert_relative_eq!(c.big_g(tiny), expected, max_relative = 1e-9);
    }

    #[test]
    fn g_inverse_round_trip_zygmund() {
        let w = WeightSpec::zygmund(1.0, 1.0, std::f64::consts::E).unwrap();
        let c = EnvelopeCalculus::new(ProblemSpec::new(4, 2.5, 2.0, w).unwrap());
        for tau in [1e-6, 0.3, 1.0, 17.0, 4e3] {
            let r = c.big_g_inverse(tau);
            assert_relative_eq!(c.big_g(r), tau, max_relative = 1e-12);
        }
    }

    #[test]
    fn phi_radius_cases() {
        let c = calc(2.0, 2.0, WeightSpec::power(1.0).unwrap());
        assert_eq!(phi_monotone_radius(&c, 1.0, 1.0).unwrap(), 0.0);
        let c15 = calc(2.0, 2.0, WeightSpec::power(1.5).unwrap());
        let r1 = phi_monotone_radius(&c15, 1.0, 1.0).unwrap();
        assert_relative_eq!(r1, 3f64.powf(2.0 / 3.0), max_relative = 1e-14);
        assert_relative_eq!(r1, 2.0801, epsilon = 1e-4);
    }

    #[test]
    fn domain_checks() {
        let c = calc(2.0, 2.0, WeightSpec::power(1.0).unwrap());
        assert!(big_g(&c, 0.0).is_err());
        assert!(big_j(&c, -1.0).is_err());
        assert!(big_e(&c, 0.0).is_err());
        assert!(phi_monotone_radius(&c, 0.0, 1.0).is_err());
    }
}

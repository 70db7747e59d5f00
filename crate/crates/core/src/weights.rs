//! Exponent functions `g` of the radial weight `f(x) = exp(g(|x|))`.
//!
//! Two closed-form families are supported: pure powers `g(s) = s^α` and the
//! Zygmund-type exponents `g(s) = s^α [log(s + c)]^β`. Each carries the two
//! exponents `α₁ ≤ α₂` of its doubling bound
//! `α₁ g(s)/s ≤ g'(s) ≤ α₂ g(s)/s`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{invert_increasing_positive, log_grid};

/// Closed-form family of the weight exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    Power { alpha: f64 },
    Zygmund { alpha: f64, beta: f64, c: f64 },
}

/// A weight exponent together with its doubling exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightJson", into = "WeightJson")]
pub struct WeightSpec {
    kind: WeightKind,
    alpha1: f64,
    alpha2: f64,
}

impl WeightSpec {
    pub fn power(alpha: f64) -> Result<Self> {
        Self::with_bounds(WeightKind::Power { alpha }, alpha, alpha)
    }

    pub fn zygmund(alpha: f64, beta: f64, c: f64) -> Result<Self> {
        Self::with_bounds(WeightKind::Zygmund { alpha, beta, c }, alpha, alpha + beta)
    }

    /// Builds a spec with explicitly chosen doubling exponents.
    ///
    /// Only `0 < alpha1 <= alpha2` is enforced here; whether the exponents
    /// actually bound `g's/g` is what [`validate_doubling`] measures. This is
    /// how deliberately corrupted specs are produced for negative controls.
    pub fn with_bounds(kind: WeightKind, alpha1: f64, alpha2: f64) -> Result<Self> {
        match kind {
            WeightKind::Power { alpha } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return Err(Error::InvalidSpec(format!("power exponent must be positive, got {alpha}")));
                }
            }
            WeightKind::Zygmund { alpha, beta, c } => {
                if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "zygmund exponents must be positive, got alpha={alpha}, beta={beta}"
                    )));
                }
                if !(c.is_finite() && c > 1.0) {
                    return Err(Error::InvalidSpec(format!("zygmund shift c must exceed 1, got {c}")));
                }
            }
        }
        if !(alpha1.is_finite() && alpha2.is_finite() && alpha1 > 0.0 && alpha1 <= alpha2) {
            return Err(Error::InvalidSpec(format!(
                "doubling exponents must satisfy 0 < alpha1 <= alpha2, got {alpha1}, {alpha2}"
            )));
        }
        let spec = Self { kind, alpha1, alpha2 };
        spec.check_sign()?;
        Ok(spec)
    }

    fn check_sign(&self) -> Result<()> {
        if self.g(0.0) != 0.0 {
            return Err(Error::InvalidSpec("g(0) must vanish".into()));
        }
        for s in log_grid(1e-8, 1e8, 33) {
            if !(self.g(s) > 0.0) {
                return Err(Error::InvalidSpec(format!("g({s}) is not positive")));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    /// `g(s)` for `s >= 0`, without domain checks.
    #[inline]
    pub fn g(&self, s: f64) -> f64 {
        match self.kind {
            WeightKind::Power { alpha } => {
                if alpha == 1.0 {
                    s
                } else {
                    s.powf(alpha)
                }
            }
            WeightKind::Zygmund { alpha, beta, c } => {
                if s == 0.0 {
                    0.0
                } else {
                    s.powf(alpha) * (s + c).ln().powf(beta)
                }
            }
        }
    }

    /// `g'(s)` for `s > 0`, without domain checks.
    #[inline]
    pub fn g_prime(&self, s: f64) -> f64 {
        match self.kind {
            WeightKind::Power { alpha } => {
                if alpha == 1.0 {
                    1.0
                } else {
                    alpha * s.powf(alpha - 1.0)
                }
            }
            WeightKind::Zygmund { alpha, beta, c } => {
                let l = (s + c).ln();
                s.powf(alpha - 1.0) * l.powf(beta - 1.0) * (alpha * l + beta * s / (s + c))
            }
        }
    }

    /// `s g'(s) / g(s)`, evaluated without cancellation.
    #[inline]
    pub fn log_slope(&self, s: f64) -> f64 {
        match self.kind {
            WeightKind::Power { alpha } => alpha,
            WeightKind::Zygmund { alpha, beta, c } => alpha + beta * s / ((s + c) * (s + c).ln()),
        }
    }

    /// `g''(s)` for `s > 0`.
    pub fn g_second(&self, s: f64) -> f64 {
        match self.kind {
            WeightKind::Power { alpha } => alpha * (alpha - 1.0) * s.powf(alpha - 2.0),
            WeightKind::Zygmund { alpha, beta, c } => {
                // g = g * h with h = s g'/g; g'' = (g' h + g h') / s - g h / s^2
                let l = (s + c).ln();
                let q = s / ((s + c) * l);
                let dq = (c * l - s) / ((s + c) * (s + c) * l * l);
                let h = alpha + beta * q;
                let g = self.g(s);
                let gp = g * h / s;
                (gp * h + g * beta * dq) / s - g * h / (s * s)
            }
        }
    }
}

impl WeightSpec {
    /// `g⁻¹(y)` for `y >= 0`.
    pub fn g_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match self.kind {
            WeightKind::Power { alpha } => y.powf(1.0 / alpha),
            WeightKind::Zygmund { alpha, .. } => {
                let seed = y.powf(1.0 / alpha);
                let s = invert_increasing_positive(|s| self.g(s), y, seed, 200)
                    .expect("g is continuous, increasing and unbounded");
                // One Newton polish; bisection already lands within a few ulps.
                let polished = s - (self.g(s) - y) / self.g_prime(s);
                if polished > 0.0 && (self.g(polished) - y).abs() <= (self.g(s) - y).abs() {
                    polished
                } else {
                    s
                }
            }
        }
    }
}

/// `g(s)`; `g(0) = 0` and `g` is strictly increasing.
pub fn eval_g(spec: &WeightSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(domain("eval_g", format!("s = {s} must be a finite nonnegative number")));
    }
    Ok(spec.g(s))
}

/// `g'(s)` for `s > 0`, computed analytically per family.
pub fn eval_g_prime(spec: &WeightSpec, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(domain("eval_g_prime", format!("s = {s} must be positive")));
    }
    Ok(spec.g_prime(s))
}

/// `g⁻¹(y)` for `y >= 0`.
pub fn invert_g(spec: &WeightSpec, y: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(domain("invert_g", format!("y = {y} must be a finite nonnegative number")));
    }
    Ok(spec.g_inverse(y))
}

/// Outcome of one inequality family over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub name: String,
    /// Largest relative violation found; `0` when the inequality holds.
    pub max_violation: f64,
    /// Sample location of the largest violation (or of the tightest point).
    pub argmax_r: f64,
    pub pass: bool,
}

impl InequalityRecord {
    pub(crate) fn tracker(name: &str, tol: f64) -> SandwichAccumulator {
        SandwichAccumulator {
            name: name.to_string(),
            tol,
            worst: 0.0,
            at: f64::NAN,
        }
    }
}

/// Accumulates relative violations of `lower <= mid <= upper`.
pub(crate) struct SandwichAccumulator {
    name: String,
    tol: f64,
    worst: f64,
    at: f64,
}

impl SandwichAccumulator {
    pub(crate) fn check(&mut self, r: f64, lower: f64, mid: f64, upper: f64) {
        let scale = lower.abs().max(mid.abs()).max(upper.abs()).max(f64::MIN_POSITIVE);
        let v = ((lower - mid).max(mid - upper)).max(0.0) / scale;
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.worst || self.at.is_nan() {
            self.worst = self.worst.max(v);
            self.at = r;
        }
    }

    /// Like [`check`](Self::check) for quantities already in log form,
    /// where an absolute gap is a relative gap of the underlying values.
    pub(crate) fn check_log(&mut self, r: f64, lower: f64, mid: f64, upper: f64) {
        let v = ((lower - mid).max(mid - upper)).max(0.0);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.worst || self.at.is_nan() {
            self.worst = self.worst.max(v);
            self.at = r;
        }
    }

    pub(crate) fn finish(self) -> InequalityRecord {
        InequalityRecord {
            pass: self.worst <= self.tol,
            name: self.name,
            max_violation: self.worst,
            argmax_r: self.at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub records: Vec<InequalityRecord>,
    pub tol_rel: f64,
    pub pass: bool,
}

/// Default log grid for weight and envelope checks: 6 decades either side of 1.
pub fn standard_grid() -> Vec<f64> {
    log_grid(1e-6, 1e6, 121)
}

/// Measures the doubling bounds of `spec` on `grid`.
///
/// Checks `α₁g/s <= g' <= α₂g/s` at each sample and the scaling bounds
/// `λ^{α₁}g(r) <= g(λr) <= λ^{α₂}g(r)` for every ordered pair `r <= λr`
/// of samples (the `λ <= 1` form is the same family read backwards).
pub fn validate_doubling(spec: &WeightSpec, grid: &[f64], tol_rel: f64) -> ValidationReport {
    let (a1, a2) = (spec.alpha1, spec.alpha2);
    let mut deriv = InequalityRecord::tracker("doubling_derivative", tol_rel);
    let mut scaling = InequalityRecord::tracker("doubling_scaling", tol_rel);
    for &s in grid {
        let ratio = s * spec.g_prime(s) / spec.g(s);
        deriv.check(s, a1, ratio, a2);
    }
    for (i, &r) in grid.iter().enumerate() {
        let gr = spec.g(r);
        for &rl in &grid[i..] {
            let lambda = rl / r;
            // compare in log form so that large λ^{α} does not overflow
            let lg = spec.g(rl).ln() - gr.ln();
            let ll = lambda.ln();
            scaling.check_log(r, a1 * ll, lg, a2 * ll);
        }
    }
    let records = vec![deriv.finish(), scaling.finish()];
    let pass = records.iter().all(|r| r.pass);
    ValidationReport { records, tol_rel, pass }
}

/// Problem data: dimension `N`, exponents `p`, `m`, and the weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemJson", into = "ProblemJson")]
pub struct ProblemSpec {
    n: u32,
    p: f64,
    m: f64,
    weight: WeightSpec,
}

impl ProblemSpec {
    /// Validates `1 < p < N`, `p + m - 3 > 0` and `α₂ < p`.
    pub fn new(n: u32, p: f64, m: f64, weight: WeightSpec) -> Result<Self> {
        if !(p.is_finite() && m.is_finite()) {
            return Err(Error::InvalidSpec("p and m must be finite".into()));
        }
        if !(p > 1.0 && p < n as f64) {
            return Err(Error::InvalidSpec(format!("need 1 < p < N, got p = {p}, N = {n}")));
        }
        if !(p + m - 3.0 > 0.0) {
            return Err(Error::InvalidSpec(format!("need p + m - 3 > 0, got p = {p}, m = {m}")));
        }
        if !(weight.alpha2 < p) {
            return Err(Error::InvalidSpec(format!(
                "need alpha2 < p, got alpha2 = {}, p = {p}",
                weight.alpha2
            )));
        }
        Ok(Self { n, p, m, weight })
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    /// `p + m - 3`, the degeneracy exponent that sets every time rate.
    pub fn kappa(&self) -> f64 {
        self.p + self.m - 3.0
    }

    /// `(N - p)/(p - 1)`.
    pub fn beta(&self) -> f64 {
        (self.n as f64 - self.p) / (self.p - 1.0)
    }
}

// ---- JSON shapes ----

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum WeightJson {
    Power {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha2: Option<f64>,
    },
    Zygmund {
        alpha: f64,
        beta: f64,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha2: Option<f64>,
    },
}

impl TryFrom<WeightJson> for WeightSpec {
    type Error = Error;

    fn try_from(w: WeightJson) -> Result<Self> {
        match w {
            WeightJson::Power { alpha, alpha1, alpha2 } => Self::with_bounds(
                WeightKind::Power { alpha },
                alpha1.unwrap_or(alpha),
                alpha2.unwrap_or(alpha),
            ),
            WeightJson::Zygmund {
                alpha,
                beta,
                c,
                alpha1,
                alpha2,
            } => Self::with_bounds(
                WeightKind::Zygmund { alpha, beta, c },
                alpha1.unwrap_or(alpha),
                alpha2.unwrap_or(alpha + beta),
            ),
        }
    }
}

impl From<WeightSpec> for WeightJson {
    fn from(w: WeightSpec) -> Self {
        match w.kind {
            WeightKind::Power { alpha } => WeightJson::Power {
                alpha,
                alpha1: (w.alpha1 != alpha).then_some(w.alpha1),
                alpha2: (w.alpha2 != alpha).then_some(w.alpha2),
            },
            WeightKind::Zygmund { alpha, beta, c } => WeightJson::Zygmund {
                alpha,
                beta,
                c,
                alpha1: (w.alpha1 != alpha).then_some(w.alpha1),
                alpha2: (w.alpha2 != alpha + beta).then_some(w.alpha2),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    #[serde(rename = "N")]
    n: u32,
    p: f64,
    m: f64,
    weight: WeightSpec,
}

impl TryFrom<ProblemJson> for ProblemSpec {
    type Error = Error;

    fn try_from(j: ProblemJson) -> Result<Self> {
        ProblemSpec::new(j.n, j.p, j.m, j.weight)
    }
}

impl From<ProblemSpec> for ProblemJson {
    fn from(p: ProblemSpec) -> Self {
        ProblemJson {
            n: p.n,
            p: p.p,
            m: p.m,
            weight: p.weight,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_values() {
        let w = WeightSpec::power(1.0).unwrap();
        assert_eq!(eval_g(&w, 2.0).unwrap(), 2.0);
        assert_eq!(eval_g_prime(&w, 5.0).unwrap(), 1.0);
        assert_eq!(invert_g(&w, 3.0).unwrap(), 3.0);
        let w2 = WeightSpec::power(2.0).unwrap();
        assert_relative_eq!(invert_g(&w2, 9.0).unwrap(), 3.0, max_relative = 1e-15);
        let w3 = WeightSpec::power(1.7).unwrap();
        for s in [0.3, 1.0, 7.5] {
            assert_relative_eq!(w3.g_prime(s) * s / w3.g(s), 1.7, max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        for w in [
            WeightSpec::power(0.5).unwrap(),
            WeightSpec::zygmund(1.0, 1.0, std::f64::consts::E).unwrap(),
        ] {
            assert_eq!(eval_g(&w, 0.0).unwrap(), 0.0);
            assert_eq!(invert_g(&w, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn zygmund_values() {
        let w = WeightSpec::zygmund(1.0, 1.0, std::f64::consts::E).unwrap();
        // s log(s + e) at s = 1, and its derivative log(1+e) + 1/(1+e)
        let l = (1.0 + std::f64::consts::E).ln();
        assert_relative_eq!(eval_g(&w, 1.0).unwrap(), l, max_relative = 1e-15);
        assert_relative_eq!(l, 1.31326, epsilon = 1e-5);
        let d = l + 1.0 / (1.0 + std::f64::consts::E);
        assert_relative_eq!(eval_g_prime(&w, 1.0).unwrap(), d, max_relative = 1e-15);
        assert_relative_eq!(d, 1.5822, epsilon = 1e-4);
        assert_relative_eq!(invert_g(&w, l).unwrap(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn second_derivative_matches_differences() {
        let w = WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap();
        for s in [1e-3, 0.1, 1.0, 30.0, 1e4] {
            let h = 1e-4 * s;
            let fd = (w.g_prime(s + h) - w.g_prime(s - h)) / (2.0 * h);
            assert_relative_eq!(w.g_second(s), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn domain_errors() {
        let w = WeightSpec::power(1.0).unwrap();
        assert!(matches!(eval_g(&w, -1.0), Err(Error::Domain { .. })));
        assert!(matches!(eval_g_prime(&w, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(invert_g(&w, -0.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(WeightSpec::zygmund(1.0, 1.0, 1.0).is_err());
        assert!(WeightSpec::zygmund(1.0, 0.0, 2.0).is_err());
        assert!(WeightSpec::power(0.0).is_err());
        assert!(WeightSpec::with_bounds(WeightKind::Power { alpha: 1.0 }, 1.2, 1.0).is_err());
    }

    #[test]
    fn doubling_reports() {
        let grid = standard_grid();
        let r = validate_doubling(&WeightSpec::power(1.5).unwrap(), &grid, 1e-10);
        assert!(r.pass);
        assert!(r.records.iter().all(|x| x.max_violation <= 1e-14));
        let z = validate_doubling(&WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap(), &grid, 1e-10);
        assert!(z.pass, "{z:?}");
        let bad = WeightSpec::with_bounds(WeightKind::Zygmund { alpha: 0.5, beta: 0.5, c: 2.0 }, 0.5, 0.6).unwrap();
        let b = validate_doubling(&bad, &grid, 1e-10);
        assert!(!b.pass);
    }

    #[test]
    fn problem_constraints() {
        let w = WeightSpec::power(1.0).unwrap();
        assert!(ProblemSpec::new(3, 2.0, 2.0, w).is_ok());
        assert!(ProblemSpec::new(2, 2.0, 2.0, w).is_err());
        assert!(ProblemSpec::new(3, 2.0, 1.0, w).is_err());
        assert!(ProblemSpec::new(3, 0.9, 3.0, w).is_err());
        let w2 = WeightSpec::power(2.0).unwrap();
        assert!(ProblemSpec::new(3, 2.0, 2.0, w2).is_err());
    }

    #[test]
    fn problem_json_shape() {
        let text = r#"{"N":3,"p":2.0,"m":2.0,"weight":{"kind":"power","alpha":1.0}}"#;
        let p: ProblemSpec = serde_json::from_str(text).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(serde_json::to_string(&p).unwrap(), text);
        let z = r#"{"N":4,"p":2.5,"m":1.0,"weight":{"kind":"zygmund","alpha":0.5,"beta":0.5,"c":2.0}}"#;
        let pz: ProblemSpec = serde_json::from_str(z).unwrap();
        assert_eq!(pz.weight().alpha2(), 1.0);
        let bad = r#"{"N":3,"p":2.0,"m":2.0,"weight":{"kind":"power","alpha":2.5}}"#;
        assert!(serde_json::from_str::<ProblemSpec>(bad).is_err());
        let missing = r#"{"N":3,"p":2.0,"weight":{"kind":"power","alpha":1.0}}"#;
        assert!(serde_json::from_str::<ProblemSpec>(missing).is_err());
    }
}

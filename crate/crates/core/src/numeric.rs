//! Quadrature and root-bracketing helpers shared by the analysis modules.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub(crate) struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    fn new(n: usize) -> Self {
        let rule = GaussLegendre::new(n.try_into().expect("degree >= 2"));
        let (nodes, weights) = rule.iter().map(|(x, w)| (*x, *w)).unzip();
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    #[inline]
    pub(crate) fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

pub(crate) fn gauss8() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::new(8))
}

pub(crate) fn gauss16() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::new(16))
}

pub(crate) fn gauss64() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::new(64))
}

/// Adaptive Gauss–Legendre quadrature on a finite interval.
///
/// Each panel is compared against the sum over its two halves; panels are
/// split until the difference drops below the local share of the tolerance.
pub fn adaptive_quad(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gauss16();
    let whole = rule.integrate(a, b, f);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = 0.0;
    let mut comp = 0.0; // Kahan compensation
    let scale = whole.abs();
    let mut splits = 0usize;
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, f);
        let right = rule.integrate(mid, hi, f);
        let refined = left + right;
        let err = (refined - est).abs();
        let width_share = ((hi - lo) / (b - a)).abs();
        let allowed = (rel_tol * scale.max(refined.abs())).max(abs_tol) * width_share.max(1e-3);
        if err <= allowed || depth >= 60 || (hi - lo).abs() <= 1e-15 * lo.abs().max(hi.abs()) {
            if depth >= 60 {
                return Err(Error::Numeric(format!(
                    "adaptive quadrature did not converge on [{lo}, {hi}]"
                )));
            }
            let y = refined - comp;
            let t = total + y;
            comp = (t - total) - y;
            total = t;
        } else {
            splits += 1;
            if splits > 200_000 {
                return Err(Error::Numeric("adaptive quadrature exceeded panel budget".into()));
            }
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if !total.is_finite() {
        return Err(Error::Numeric("quadrature produced a non-finite value".into()));
    }
    Ok(total)
}

/// Integrates a positive, eventually decaying integrand over `[a, ∞)`.
///
/// Panels of doubling width are integrated adaptively until a panel
/// contributes less than `rel_tol * 1e-3` of the running total.
pub fn quad_to_infinity(f: &impl Fn(f64) -> f64, a: f64, first_width: f64, rel_tol: f64) -> Result<f64> {
    let mut lo = a;
    let mut width = first_width;
    let mut total = 0.0;
    let mut quiet = 0;
    for _ in 0..2000 {
        let hi = lo + width;
        let piece = adaptive_quad(f, lo, hi, rel_tol * 0.1, 0.0)?;
        total += piece;
        if piece.abs() <= rel_tol * 1e-3 * total.abs() {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
        if !lo.is_finite() {
            break;
        }
    }
    Err(Error::Numeric(format!("tail integral from {a} did not converge")))
}

/// Bisection for an increasing function: finds `x` in `[lo, hi]` with
/// `f(x) = target`. Requires `f(lo) <= target <= f(hi)`.
pub(crate) fn bisect_increasing(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    max_iter: usize,
) -> f64 {
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `f(x) = target` for increasing `f` on `(0, ∞)`, bisecting in
/// `log x` after expanding a bracket geometrically around `seed`.
pub(crate) fn invert_increasing_positive(
    f: impl Fn(f64) -> f64,
    target: f64,
    seed: f64,
    max_iter: usize,
) -> Result<f64> {
    let seed = if seed.is_finite() && seed > 0.0 { seed } else { 1.0 };
    let mut lo = seed;
    let mut hi = seed;
    let mut k = 0;
    while f(lo) > target {
        lo *= 0.5;
        k += 1;
        if k > 2200 || lo == 0.0 {
            return Err(Error::Invariant(format!("cannot bracket root for target {target} from below")));
        }
    }
    k = 0;
    while f(hi) < target {
        hi *= 2.0;
        k += 1;
        if k > 2200 || !hi.is_finite() {
            return Err(Error::Invariant(format!("cannot bracket root for target {target} from above")));
        }
    }
    if lo == hi {
        return Ok(lo);
    }
    let x = bisect_increasing(|v| f(v.exp()), lo.ln(), hi.ln(), target, max_iter);
    Ok(x.exp())
}

/// Log-spaced samples `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Magnitude of the negative part.
#[inline]
pub(crate) fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let f = |x: f64| 1.0 / (1e-4 + x * x);
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        let v = adaptive_quad(&f, -1.0, 1.0, 1e-12, 0.0).unwrap();
        assert!((v - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn tail_integral_of_exponential() {
        let v = quad_to_infinity(&|x: f64| (-x).exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inversion_of_cube() {
        let x = invert_increasing_positive(|x| x * x * x, 27.0, 100.0, 200).unwrap();
        assert!((x - 3.0).abs() < 1e-13);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1e3, 7);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert!((g[6] - 1e3).abs() < 1e-10);
        assert!((g[3] - 1.0).abs() < 1e-14);
    }
}

//! Explicit finite-volume solver for the radial equation
//! `r^{N-1} e^{g} U_t = ∂_r[r^{N-1} e^{g} U^{m-1}|U_r|^{p-2}U_r]`,
//! plus decay, support and comparison measurements on its output.
//!
//! Cells are uniform on `[0, r_max]`. The face flux is
//! `q = Ū^{m-1}|s|^{p-2}s` with `Ū` the arithmetic mean of the neighbours
//! and `s` the difference quotient; both ends carry zero flux. The update
//! `U_i += Δt (w_{i+½} q_{i+½} - w_{i-½} q_{i-½}) / V_i` uses the exact cell
//! volume `V_i = ∫ r^{N-1}e^{g}` and face weights `w = r^{N-1}e^{g}`; the
//! ratios `w/V` are integrated directly so that `e^{g}` never overflows.
//!
//! The time step is the largest for which every cell update is
//! nondecreasing in its own value, which together with `p >= m` makes the
//! scheme monotone (discrete comparison) and keeps `U >= 0`.

use serde::{Deserialize, Serialize};

use crate::barriers::{Barrier, BarrierKind, BarrierParams};
use crate::envelope::EnvelopeCalculus;
use crate::error::{Error, Result};
use crate::numeric::{gauss8, log_grid};
use crate::weights::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n_cells: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n_cells: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) || n_cells < 2 {
            return Err(Error::Config(format!("invalid grid: r_max = {r_max}, n_cells = {n_cells}")));
        }
        Ok(Self { r_max, n_cells })
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.n_cells as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let dr = self.dr();
        (0..self.n_cells).map(|i| (i as f64 + 0.5) * dr).collect()
    }

    /// Same cell count, `r_max` raised to at least `r_min`.
    pub fn enlarged_to(&self, r_min: f64) -> Self {
        Self {
            r_max: self.r_max.max(r_min),
            n_cells: self.n_cells,
        }
    }
}

/// Radial initial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// `height (1 - (r/radius)²)₊`
    Bump { radius: f64, height: f64 },
    Constant { value: f64 },
}

impl InitialData {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            InitialData::Zero => 0.0,
            InitialData::Bump { radius, height } => height * (1.0 - (r / radius).powi(2)).max(0.0),
            InitialData::Constant { value } => value,
        }
    }

    pub fn sample(&self, grid: &RadialGrid) -> Vec<f64> {
        grid.centers().into_iter().map(|r| self.eval(r)).collect()
    }

    /// Radius of the support (infinite for nonzero constants).
    pub fn support_radius(&self) -> f64 {
        match *self {
            InitialData::Zero => 0.0,
            InitialData::Bump { radius, .. } => radius,
            InitialData::Constant { value } => {
                if value == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            InitialData::Zero => 0.0,
            InitialData::Bump { height, .. } => height.max(0.0),
            InitialData::Constant { value } => value.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub cfl: f64,
    /// Output times besides `t = 0`; empty means 10 per decade down to
    /// `t_end·10⁻⁶`.
    pub checkpoints: Vec<f64>,
    pub max_steps: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            checkpoints: Vec::new(),
            max_steps: 2_000_000_000,
        }
    }
}

/// Trajectory sampled at checkpoints.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub grid: RadialGrid,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub fields: Vec<Vec<f64>>,
    pub supnorm_history: Vec<f64>,
    pub support_history: Vec<f64>,
    pub mass_history: Vec<f64>,
    pub theta_supp: f64,
    pub steps: u64,
}

/// Precomputed geometry: `w_{i±½}/V_i` and `V_i`.
struct Geometry {
    cap_lo: Vec<f64>,
    cap_hi: Vec<f64>,
    volume: Vec<f64>,
}

impl Geometry {
    fn new(problem: &ProblemSpec, grid: &RadialGrid) -> Self {
        let n = grid.n_cells;
        let dr = grid.dr();
        let nm1 = problem.dim() as f64 - 1.0;
        let w = problem.weight();
        let rule = gauss8();
        let ratio = |a: f64, b: f64, rf: f64| {
            let grf = w.g(rf);
            rule.integrate(a, b, |s| (s / rf).powf(nm1) * (w.g(s) - grf).exp())
        };
        let mut cap_lo = vec![0.0; n];
        let mut cap_hi = vec![0.0; n];
        let mut volume = vec![0.0; n];
        for i in 0..n {
            let (a, b) = (i as f64 * dr, (i + 1) as f64 * dr);
            if i > 0 {
                cap_lo[i] = 1.0 / ratio(a, b, a);
            }
            if i + 1 < n {
                cap_hi[i] = 1.0 / ratio(a, b, b);
            }
            volume[i] = rule.integrate(a, b, |s| s.powf(nm1) * w.g(s).exp());
        }
        Self { cap_lo, cap_hi, volume }
    }
}

/// Face flux and its partial derivatives in the left and right values.
#[derive(Clone, Copy)]
struct FaceLaw {
    p: f64,
    m: f64,
    inv_dr: f64,
    s_floor: f64,
    p_is_2: bool,
    m_is_2: bool,
}

impl FaceLaw {
    #[inline(always)]
    fn eval(&self, ul: f64, ur: f64) -> (f64, f64, f64) {
        let uf = (0.5 * (ul + ur)).max(0.0);
        if uf == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let s = (ur - ul) * self.inv_dr;
        // φ = Ū^{m-1}, ψ = |s|^{p-2} (floored in the derivative only)
        let (phi, dphi) = if self.m_is_2 {
            (uf, 1.0)
        } else {
            let phi = uf.powf(self.m - 1.0);
            (phi, (self.m - 1.0) * phi / uf)
        };
        let (q_s, psi_d) = if self.p_is_2 {
            (s, 1.0)
        } else {
            let a = s.abs();
            (a.powf(self.p - 2.0) * s, a.max(self.s_floor).powf(self.p - 2.0))
        };
        let q = phi * q_s;
        let common = 0.5 * dphi * q_s;
        let diff = phi * (self.p - 1.0) * psi_d * self.inv_dr;
        (q, common - diff, common + diff)
    }
}

fn default_checkpoints(t_end: f64) -> Vec<f64> {
    log_grid(t_end * 1e-6, t_end, 61)
}

fn support_face(u: &[f64], theta: f64, dr: f64) -> f64 {
    match u.iter().rposition(|&v| v > theta) {
        Some(i) => (i + 1) as f64 * dr,
        None => 0.0,
    }
}

/// Integrates from cell values `u0` to `t_end`.
pub fn simulate(
    problem: &ProblemSpec,
    u0: &[f64],
    grid: &RadialGrid,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<RadialSolution> {
    let n = grid.n_cells;
    if u0.len() != n {
        return Err(Error::Config(format!("initial data has {} values for {n} cells", u0.len())));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("t_end = {t_end} must be positive")));
    }
    if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(Error::Config(format!("cfl = {} must lie in (0, 1]", opts.cfl)));
    }
    if u0.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Config("initial data must be finite and nonnegative".into()));
    }
    let mut checkpoints = if opts.checkpoints.is_empty() {
        default_checkpoints(t_end)
    } else {
        opts.checkpoints.clone()
    };
    checkpoints.retain(|&t| t > 0.0 && t <= t_end);
    checkpoints.sort_by(f64::total_cmp);
    checkpoints.dedup();
    if checkpoints.last() != Some(&t_end) {
        checkpoints.push(t_end);
    }

    let geo = Geometry::new(problem, grid);
    let dr = grid.dr();
    let sup0 = u0.iter().cloned().fold(0.0, f64::max);
    let theta = 1e-12 * sup0;
    let boundary_free = u0[n - 1] == 0.0;
    let law = FaceLaw {
        p: problem.p(),
        m: problem.m(),
        inv_dr: 1.0 / dr,
        s_floor: 1e-8 * sup0.max(f64::MIN_POSITIVE) / dr,
        p_is_2: problem.p() == 2.0,
        m_is_2: problem.m() == 2.0,
    };

    let mut u = u0.to_vec();
    let mass = |u: &[f64]| u.iter().zip(&geo.volume).map(|(a, b)| a * b).sum::<f64>();
    let mut sol = RadialSolution {
        grid: *grid,
        times: vec![0.0],
        fields: vec![u.clone()],
        supnorm_history: vec![sup0],
        support_history: vec![support_face(&u, theta, dr)],
        mass_history: vec![mass(&u)],
        theta_supp: theta,
        steps: 0,
    };
    let record = |sol: &mut RadialSolution, t: f64, u: &[f64]| {
        sol.times.push(t);
        sol.fields.push(u.to_vec());
        sol.supnorm_history.push(u.iter().cloned().fold(0.0, f64::max));
        sol.support_history.push(support_face(u, theta, dr));
        sol.mass_history.push(mass(u));
    };

    if sup0 == 0.0 {
        for &tc in &checkpoints {
            record(&mut sol, tc, &u);
        }
        return Ok(sol);
    }

    let mut flux = vec![0.0; n];
    let mut bound = vec![0.0; n];
    let mut t = 0.0;
    let mut last = u.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    for &target in &checkpoints {
        while t < target {
            if sol.steps >= opts.max_steps {
                return Err(Error::Numeric(format!("step budget exhausted at t = {t}")));
            }
            // faces 0..nf lie between cells j and j+1
            let nf = (last + 2).min(n - 1);
            bound[..=nf].iter_mut().for_each(|b| *b = 0.0);
            for j in 0..nf {
                let (q, dl, dr_) = law.eval(u[j], u[j + 1]);
                flux[j] = q;
                bound[j] += geo.cap_hi[j] * dl.abs();
                bound[j + 1] += geo.cap_lo[j + 1] * dr_.abs();
            }
            let rate = bound[..=nf].iter().cloned().fold(0.0, f64::max);
            let mut dt = opts.cfl / (rate + 1e-30);
            let clipped = t + dt >= target;
            if clipped {
                dt = target - t;
            }
            let mut prev = 0.0;
            for i in 0..=nf {
                let up = if i < nf { flux[i] } else { 0.0 };
                u[i] += dt * (geo.cap_hi[i] * up - geo.cap_lo[i] * prev);
                prev = up;
            }
            t = if clipped { target } else { t + dt };
            sol.steps += 1;
            while last + 1 < n && u[last + 1] > 0.0 {
                last += 1;
            }
            if let Some(i) = u[..=nf].iter().position(|&v| v < -1e-12) {
                return Err(Error::Instability {
                    value: u[i],
                    r: (i as f64 + 0.5) * dr,
                    t,
                });
            }
            if boundary_free && u[n - 1] > theta {
                return Err(Error::GridTooSmall { r_max: grid.r_max, t });
            }
        }
        record(&mut sol, target, &u);
    }
    Ok(sol)
}

/// Decay band width allowed by [`measure_decay`].
pub const DECAY_BAND: f64 = 10.0;
/// Support band width allowed by [`measure_support`].
pub const SUPPORT_BAND: f64 = 5.0;
/// Measurements need `t_end >= HORIZON_DECADES_MIN · e`.
pub const HORIZON_MIN_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    /// `‖U(t)‖∞ / [g⁻¹(log t)^p / (t log t)]^{1/(p+m-3)}`
    pub ratios: Vec<f64>,
    pub window: (f64, f64),
    pub window_min: f64,
    pub window_max: f64,
    pub band: f64,
    /// Least-squares slope of `log ‖U‖∞` against `log t` over the last decade.
    pub fitted_exponent: f64,
    pub pass: bool,
}

fn check_horizon(sol: &RadialSolution) -> Result<f64> {
    let t_end = *sol.times.last().unwrap_or(&0.0);
    if t_end < HORIZON_MIN_FACTOR * std::f64::consts::E {
        return Err(Error::Config(format!(
            "horizon t_end = {t_end} too short: need at least {} for the asymptotic window",
            HORIZON_MIN_FACTOR * std::f64::consts::E
        )));
    }
    Ok(t_end)
}

fn band_of(values: &[f64]) -> (f64, f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let band = if hi == 0.0 {
        1.0
    } else if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    };
    (lo, hi, band)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn measure_decay(sol: &RadialSolution, calc: &EnvelopeCalculus) -> Result<DecayReport> {
    let t_end = check_horizon(sol)?;
    let pr = calc.problem();
    let k = pr.p() + pr.m() - 3.0;
    let mut times = Vec::new();
    let mut ratios = Vec::new();
    for (&t, &s) in sol.times.iter().zip(&sol.supnorm_history) {
        if t <= std::f64::consts::E {
            continue;
        }
        let lt = t.ln();
        let envelope = (calc.weight().g_inverse(lt).powf(pr.p()) / (t * lt)).powf(1.0 / k);
        times.push(t);
        ratios.push(s / envelope);
    }
    let window = (t_end / 100.0, t_end);
    let in_window: Vec<f64> = times
        .iter()
        .zip(&ratios)
        .filter(|(&t, _)| t >= window.0 * (1.0 - 1e-12))
        .map(|(_, &r)| r)
        .collect();
    let (window_min, window_max, band) = band_of(&in_window);
    let (xs, ys): (Vec<f64>, Vec<f64>) = sol
        .times
        .iter()
        .zip(&sol.supnorm_history)
        .filter(|(&t, &s)| t >= t_end / 10.0 * (1.0 - 1e-12) && s > 0.0)
        .map(|(&t, &s)| (t.ln(), s.ln()))
        .unzip();
    let fitted_exponent = if xs.len() >= 2 { slope(&xs, &ys) } else { f64::NAN };
    Ok(DecayReport {
        times,
        ratios,
        window,
        window_min,
        window_max,
        band,
        fitted_exponent,
        pass: band <= DECAY_BAND,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportReport {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    /// `R̄(t) / g⁻¹(log t)`
    pub ratios: Vec<f64>,
    pub window: (f64, f64),
    pub window_min: f64,
    pub window_max: f64,
    pub band: f64,
    pub monotone: bool,
    pub pass: bool,
}

pub fn measure_support(sol: &RadialSolution, calc: &EnvelopeCalculus) -> Result<SupportReport> {
    let t_end = check_horizon(sol)?;
    let mut times = Vec::new();
    let mut radii = Vec::new();
    let mut ratios = Vec::new();
    for (&t, &rb) in sol.times.iter().zip(&sol.support_history) {
        if t <= std::f64::consts::E {
            continue;
        }
        times.push(t);
        radii.push(rb);
        ratios.push(rb / calc.weight().g_inverse(t.ln()));
    }
    let window = (t_end / 100.0, t_end);
    let in_window: Vec<f64> = times
        .iter()
        .zip(&ratios)
        .filter(|(&t, _)| t >= window.0 * (1.0 - 1e-12))
        .map(|(_, &r)| r)
        .collect();
    let (window_min, window_max, band) = band_of(&in_window);
    let monotone = sol.support_history.windows(2).all(|w| w[1] >= w[0]);
    Ok(SupportReport {
        times,
        radii,
        ratios,
        window,
        window_min,
        window_max,
        band,
        monotone,
        pass: band <= SUPPORT_BAND && monotone,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub kind: BarrierKind,
    /// Largest `U - ũ` (super) or `ũ - U` (sub) over all nodes and times.
    pub worst_excess: f64,
    /// Largest excess measured in units of the local tolerance.
    pub worst_ratio: f64,
    pub worst_location: (f64, f64),
    /// `tol_cmp(t_k) = sqrt(Δr) ‖U(t_k)‖∞` per checkpoint
    pub tolerances: Vec<f64>,
    pub per_time_excess: Vec<f64>,
    pub pass: bool,
}

/// Discretization tolerance for comparisons at one checkpoint.
pub fn comparison_tolerance(grid: &RadialGrid, supnorm: f64) -> f64 {
    grid.dr().sqrt() * supnorm
}

pub fn compare_to_barrier(
    sol: &RadialSolution,
    params: &BarrierParams,
    calc: &EnvelopeCalculus,
) -> ComparisonReport {
    let b = Barrier::new(params, calc);
    let centers = sol.grid.centers();
    let sign = match params.kind {
        BarrierKind::Super => 1.0,
        BarrierKind::Sub => -1.0,
    };
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut loc = (f64::NAN, f64::NAN);
    let mut tolerances = Vec::with_capacity(sol.times.len());
    let mut per_time = Vec::with_capacity(sol.times.len());
    for ((&t, field), &sup) in sol.times.iter().zip(&sol.fields).zip(&sol.supnorm_history) {
        let tol = comparison_tolerance(&sol.grid, sup);
        let s = b.slice(t);
        let mut here = f64::NEG_INFINITY;
        for (&r, &u) in centers.iter().zip(field) {
            let excess = sign * (u - b.eval_at(&s, r));
            here = here.max(excess);
            let ratio = if tol > 0.0 {
                excess / tol
            } else if excess > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_excess = excess;
                loc = (r, t);
            }
        }
        tolerances.push(tol);
        per_time.push(here);
    }
    ComparisonReport {
        kind: params.kind,
        worst_excess,
        worst_ratio,
        worst_location: loc,
        tolerances,
        per_time_excess: per_time,
        pass: worst_ratio <= 1.0,
    }
}

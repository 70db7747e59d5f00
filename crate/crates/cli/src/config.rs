//! Run configuration, loaded from JSON and validated before any computation.

use std::path::{Path, PathBuf};

use barrierlab::barriers::BarrierKind;
use barrierlab::residual::ResidualGrid;
use barrierlab::solver::{InitialData, SolverOptions};
use barrierlab::transform::{TransformOptions, DEFAULT_BOUND_FACTOR};
use barrierlab::{Error, ProblemSpec, Result, WeightSpec};
use serde::Deserialize;

/// Problem fields sit at the top level next to the run sections:
/// `{"N", "p", "m", "weight", "grid", "t_end", "cfl", "initial", ...}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "N")]
    n: u32,
    p: f64,
    m: f64,
    weight: WeightSpec,
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    t_end: Option<f64>,
    #[serde(default = "default_horizon_factor")]
    horizon_factor: f64,
    #[serde(default = "default_cfl")]
    cfl: f64,
    #[serde(default)]
    checkpoints: Vec<f64>,
    #[serde(default)]
    max_steps: Option<u64>,
    #[serde(default = "default_initial")]
    initial: InitialData,
    #[serde(default = "default_profile_stride")]
    profile_stride: usize,
    #[serde(default)]
    lemmas: LemmaSection,
    #[serde(default)]
    barrier: BarrierSection,
    #[serde(default)]
    residual_grid: ResidualGrid,
    #[serde(default)]
    transform: TransformSection,
}

fn default_horizon_factor() -> f64 {
    1e4
}

fn default_cfl() -> f64 {
    SolverOptions::default().cfl
}

fn default_initial() -> InitialData {
    InitialData::Bump { radius: 1.0, height: 1.0 }
}

fn default_profile_stride() -> usize {
    10
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub out_dir: Option<PathBuf>,
    pub lemmas: LemmaSection,
    pub barrier: BarrierSection,
    pub residual_grid: ResidualGrid,
    pub simulation: SimulationSection,
    pub transform: TransformSection,
    /// Directory of the config file; relative paths resolve against it.
    pub base: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Outer radius; by default 1.1 times the fitted supersolution's
    /// support at `t_end`.
    pub r_max: Option<f64>,
    pub n_cells: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { r_max: None, n_cells: 4000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSection {
    /// Relative tolerance; defaults to the weight's own (closed form or quadrature).
    pub tol: Option<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub samples: usize,
}

impl Default for LemmaSection {
    fn default() -> Self {
        Self {
            tol: None,
            r_min: 1e-6,
            r_max: 1e6,
            samples: 241,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierSection {
    pub kind: BarrierKind,
    pub lambda: f64,
    /// Previously written `barrier_params.json` to verify instead of rebuilding.
    pub params_file: Option<PathBuf>,
}

impl Default for BarrierSection {
    fn default() -> Self {
        Self {
            kind: BarrierKind::Super,
            lambda: 1.0,
            params_file: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSection {
    pub initial: InitialData,
    pub grid: GridSection,
    /// Final time; by default `horizon_factor` times the fitted
    /// supersolution's `t₀`.
    pub t_end: Option<f64>,
    pub horizon_factor: f64,
    /// Write every `profile_stride`-th cell to `profiles.csv`.
    pub profile_stride: usize,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSection {
    pub s_min: f64,
    pub s_max: f64,
    pub per_decade: usize,
    pub thin: usize,
    pub bound_factor: f64,
}

impl Default for TransformSection {
    fn default() -> Self {
        let o = TransformOptions::default();
        Self {
            s_min: o.s_min,
            s_max: o.s_max,
            per_decade: o.per_decade,
            thin: o.thin,
            bound_factor: DEFAULT_BOUND_FACTOR,
        }
    }
}

impl TransformSection {
    pub fn options(&self) -> TransformOptions {
        TransformOptions {
            s_min: self.s_min,
            s_max: self.s_max,
            per_decade: self.per_decade,
            thin: self.thin,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let raw: RawConfig = serde_json::from_str(&text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => config_err(e.to_string()),
            _ => Error::Json(e),
        })?;
        let mut solver = SolverOptions {
            cfl: raw.cfl,
            checkpoints: raw.checkpoints,
            ..SolverOptions::default()
        };
        if let Some(n) = raw.max_steps {
            solver.max_steps = n;
        }
        let cfg = RunConfig {
            problem: ProblemSpec::new(raw.n, raw.p, raw.m, raw.weight)?,
            out_dir: raw.out_dir,
            lemmas: raw.lemmas,
            barrier: raw.barrier,
            residual_grid: raw.residual_grid,
            simulation: SimulationSection {
                initial: raw.initial,
                grid: raw.grid,
                t_end: raw.t_end,
                horizon_factor: raw.horizon_factor,
                profile_stride: raw.profile_stride,
                solver,
            },
            transform: raw.transform,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.out_dir) {
            (Some(dir), _) => dir.to_path_buf(),
            (None, Some(dir)) => self.resolve(dir),
            (None, None) => self.base.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let l = &self.lemmas;
        if let Some(tol) = l.tol {
            if !(tol > 0.0) {
                return Err(config_err("lemmas.tol must be positive"));
            }
        }
        if !(l.r_min > 0.0 && l.r_max > l.r_min && l.samples >= 2) {
            return Err(config_err("lemmas grid needs 0 < r_min < r_max and at least 2 samples"));
        }
        if !(self.barrier.lambda > 0.0 && self.barrier.lambda.is_finite()) {
            return Err(config_err("barrier.lambda must be positive"));
        }
        let s = &self.simulation;
        if s.grid.n_cells < 2 {
            return Err(config_err("grid.n_cells must be at least 2"));
        }
        if !(s.solver.cfl > 0.0 && s.solver.cfl <= 1.0) {
            return Err(config_err("cfl must lie in (0, 1]"));
        }
        if s.profile_stride == 0 {
            return Err(config_err("profile_stride must be positive"));
        }
        if !(s.horizon_factor > 1.0) {
            return Err(config_err("horizon_factor must exceed 1"));
        }
        if matches!(s.grid.r_max, Some(r) if !(r > 0.0)) || matches!(s.t_end, Some(t) if !(t > 0.0)) {
            return Err(config_err("grid.r_max and t_end must be positive"));
        }
        match s.initial {
            InitialData::Bump { radius, height } if !(radius > 0.0 && height >= 0.0) => {
                return Err(config_err("bump data needs radius > 0 and height >= 0"));
            }
            InitialData::Constant { value } if !(value >= 0.0) => {
                return Err(config_err("constant data must be nonnegative"));
            }
            _ => {}
        }
        let t = &self.transform;
        if !(t.bound_factor > 1.0) {
            return Err(config_err("transform.bound_factor must exceed 1"));
        }
        let o = t;
        if !(o.s_min > 0.0 && o.s_min < 1.0 && o.s_max > 1.0 && o.per_decade >= 10 && o.thin >= 1) {
            return Err(config_err("transform needs s_min < 1 < s_max, per_decade >= 10, thin >= 1"));
        }
        Ok(())
    }
}

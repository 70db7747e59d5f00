use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function being evaluated.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// A problem or weight specification violates a standing assumption.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// A numerical routine failed to converge or to bracket a root.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// An internal invariant was violated (indicates a bug).
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// A constant-selection recipe could not be completed.
    #[error("construction failed: {0}")]
    Construction(String),

    /// Inconsistent run configuration (grids, bands, horizons).
    #[error("configuration error: {0}")]
    Config(String),

    /// The solution reached the outer boundary of the radial grid.
    #[error("grid too small: support reached r_max = {r_max} at t = {t}")]
    GridTooSmall { r_max: f64, t: f64 },

    /// The explicit scheme produced a negative value.
    #[error("instability: U = {value:e} at r = {r}, t = {t}")]
    Instability { value: f64, r: f64, t: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        func,
        detail: detail.into(),
    }
}

//! Barrier constructions and numerical checks for radial weighted doubly
//! degenerate parabolic equations
//!
//! `r^{N-1} e^{g} U_t = ∂_r [ r^{N-1} e^{g} U^{m-1} |U_r|^{p-2} U_r ]`.

pub mod barriers;
pub mod envelope;
pub mod residual;
pub mod solver;
pub mod transform;
pub mod error;
pub mod numeric;
pub mod weights;

pub use barriers::{BarrierKind, BarrierParams};
pub use envelope::{EnvelopeCalculus, LemmaReport};
pub use error::{Error, Result};
pub use weights::{ProblemSpec, WeightKind, WeightSpec};

//! Crate-wide error type.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("shifted system (sigma={sigma}, tau={tau}) is singular or numerically unsolvable")]
    SingularShift { sigma: Complex64, tau: Complex64 },

    #[error("frequency {index}: shifted solve with eigenvalue {shift} is singular")]
    SingularFrequency { index: usize, shift: Complex64 },

    #[error("newton failed to converge after {iterations} iterations (last residual {last_residual:.3e})")]
    NewtonDiverged {
        iterations: usize,
        last_residual: f64,
    },

    #[error(
        "quasi-newton residual grew for {streak} consecutive iterations; history: {history:?}"
    )]
    InnerDivergence { streak: usize, history: Vec<f64> },

    #[error("problem size {size} exceeds the configured cap {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("unisolvence failure: {0}")]
    Unisolvence(String),

    #[error("space construction failed: {0}")]
    Construction(String),

    #[error("unknown element family `{0}` (expected hz2plus, aw21 or first1)")]
    UnknownFamily(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("singular system (rank estimate {rank_estimate:?} of {size})")]
    SingularSystem {
        size: usize,
        rank_estimate: Option<usize>,
    },

    #[error("iterative solver stalled at relative residual {residual:.3e} after {iterations} iterations")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("solver error at level {level}: {source}")]
    AtLevel {
        level: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("manufactured solution validation failed: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::graph::Vertex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {0} is not part of the graph")]
    UnknownVertex(Vertex),

    #[error("unsupported presentation: {0}")]
    UnsupportedPresentation(String),

    /// A standing assumption on the graph (symmetry, zero diagonal, positive
    /// measure) failed while materializing a region.
    #[error("graph assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The operator is not positive definite; `direction` is a vector with
    /// nonpositive energy (ordered like the region's vertices).
    #[error("operator is not positive definite (energy {energy:.3e} along the reported direction)")]
    Indefinite { direction: Vec<f64>, energy: f64 },

    #[error("spectral parameter {lambda} is not below the bottom of the spectrum")]
    SpectralParameter { lambda: f64 },

    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("weight vanishes identically on the region")]
    DegenerateWeight,

    #[error("instance has {size} vertices, above the enumeration cap {cap}")]
    SizeLimit { size: usize, cap: usize },

    #[error("vertex set is not connected")]
    Disconnected,

    #[error("form is not nonnegative on level {level} (bottom eigenvalue {lambda_min:.3e})")]
    NotNonnegative { level: usize, lambda_min: f64 },

    #[error("operator is critical: there is no minimal positive Green function")]
    NoMinimalGreen,

    #[error("lattice Green integral diverges in dimension {dim} (recurrent lattice)")]
    DivergentIntegral { dim: usize },

    #[error("bottom eigenvalue is not simple (gap {gap:.3e})")]
    Multiplicity { gap: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    /// True for errors caused by malformed input rather than by a computation.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Io(_))
    }
}

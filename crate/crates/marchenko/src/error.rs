use std::path::PathBuf;

/// Error type shared by every stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integrand evaluated to a non-finite value at q = {q}")]
    NonFiniteIntegrand { q: f64 },

    #[error("quadrature on [{a}, {b}] did not reach tolerance {tol}")]
    QuadratureNoConvergence { a: f64, b: f64, tol: f64 },

    #[error("abscissae must be strictly increasing (violation at index {index})")]
    NonMonotoneAbscissae { index: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("evaluation point q = {q} outside data range [{min}, {max}]")]
    SplineOutOfRange { q: f64, min: f64, max: f64 },

    #[error("linear system is singular (pivot {pivot:e} at elimination step {pivot_index})")]
    SingularSystem { pivot_index: usize, pivot: f64 },

    #[error("kernel system for row {p} is singular (pivot at elimination step {pivot_index})")]
    SingularMarchenkoRow { p: usize, pivot_index: usize },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("scattering table has no entry at the matching radius edge q = {q_edge}")]
    MissingEdgeEntry { q_edge: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 1 for bad input or malformed files, 2 for
    /// numerical failures inside an otherwise valid run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::NonMonotoneAbscissae { .. }
            | Error::TooFewSamples { .. }
            | Error::SplineOutOfRange { .. }
            | Error::Malformed { .. }
            | Error::MissingEdgeEntry { .. }
            | Error::Io { .. } => 1,
            Error::NonFiniteIntegrand { .. }
            | Error::QuadratureNoConvergence { .. }
            | Error::SingularSystem { .. }
            | Error::SingularMarchenkoRow { .. } => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

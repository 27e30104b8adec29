use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("load position z={z} outside 1..={n}")]
    PositionOutOfRange { z: usize, n: usize },

    #[error("value not representable as f64: {0}")]
    Overflow(String),

    #[error(
        "eigenvalue iteration did not converge: dim={dim}, iterations={iterations}, \
         {unreduced} rows left unreduced"
    )]
    ConvergenceFailure {
        dim: usize,
        iterations: usize,
        unreduced: usize,
    },

    #[error("analytic root refinement diverged for {} seed(s): {seeds:?}", seeds.len())]
    SeedDivergence { seeds: Vec<Complex64> },

    #[error("approximate sensitivity is only defined for mode k=1, got k={k}")]
    UnsupportedMode { k: usize },

    #[error("mode index k={k} outside 1..={n}")]
    ModeOutOfRange { k: usize, n: usize },

    #[error("damping factor undefined for a zero eigenvalue")]
    ZeroEigenvalue,

    #[error("cannot match spectra of different sizes ({left} vs {right})")]
    CardinalityMismatch { left: usize, right: usize },

    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("eigensolver failed with load at z={z}: {source}")]
    SweepPoint {
        z: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::ConvergenceFailure { .. }
            | Error::SeedDivergence { .. }
            | Error::Overflow(_) => true,
            Error::SweepPoint { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

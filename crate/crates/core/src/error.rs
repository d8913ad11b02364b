use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular resolvent: id - z*alpha is not invertible at z = {z}")]
    SingularResolvent { z: Complex64 },

    #[error("singular resolvent on mode k = {mode} (h*lambda = {h_lambda})")]
    SingularModeResolvent { mode: i64, h_lambda: Complex64 },

    #[error("non-finite value in the nonlinearity")]
    NonlinearityOverflow,

    #[error("state left the domain: Y_0 norm {norm:.6e} exceeds radius {radius:.6e}")]
    DomainExit { norm: f64, radius: f64 },

    #[error("stage iteration did not converge after {iterations} iterations (last contraction ratio {last_ratio:.3e})")]
    ContractionFailure { iterations: usize, last_ratio: f64 },

    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("reference solution failed its self-check: successive refinements differ by {achieved:.3e} (target {target:.1e})")]
    ReferenceQuality { achieved: f64, target: f64 },

    #[error("Picard iteration diverged at iteration {iteration} (update norm {update:.3e}); horizon too long")]
    HorizonExceeded { iteration: usize, update: f64 },

    #[error("finite-difference derivative unreliable: Richardson gap {relative_gap:.3e} (relative)")]
    DerivativeUnreliable { relative_gap: f64 },

    #[error("insufficient data for a fit: {usable} usable points, at least 3 required")]
    InsufficientData { usable: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Short machine-friendly tag, used in CSV status columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::SingularResolvent { .. } | Error::SingularModeResolvent { .. } => {
                "singular-resolvent"
            }
            Error::NonlinearityOverflow => "nonlinearity-overflow",
            Error::DomainExit { .. } => "domain-exit",
            Error::ContractionFailure { .. } => "contraction-failure",
            Error::Step { source, .. } => source.kind(),
            Error::ReferenceQuality { .. } => "reference-quality",
            Error::HorizonExceeded { .. } => "horizon-exceeded",
            Error::DerivativeUnreliable { .. } => "derivative-unreliable",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::Parse { .. } => "parse-error",
        }
    }
}

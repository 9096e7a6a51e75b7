use thiserror::Error;

/// Errors produced by the numerical and data layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("in-plane polarization is zero; the polarization axis is undefined")]
    ZeroPolarization,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("X = {x} lies outside the sampled curve range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("no zeta entry for J = {0}")]
    MissingZeta(String),

    #[error("missing bound curve: {0}")]
    MissingCurve(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate least-squares design (condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("singular covariance matrix (condition number {condition:.3e}); consider a ridge term")]
    SingularCovariance { condition: f64 },

    #[error("vanishing phase derivative: sensitivity is unbounded at this phase")]
    BlindSpot,

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that originate in numerical non-convergence.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::EigenNonConvergence { .. })
    }

    /// True for failures caused by malformed or inconsistent input data.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::ZeroPolarization
                | Error::OutOfRange { .. }
                | Error::MissingZeta(_)
                | Error::MissingCurve(_)
                | Error::RankDeficient { .. }
                | Error::SingularCovariance { .. }
                | Error::BlindSpot
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

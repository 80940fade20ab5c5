use thiserror::Error;

/// Errors raised by the estimation, selection and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadrature did not reach tolerance {tol:e} (estimated error {err:e})")]
    QuadratureFailed { tol: f64, err: f64 },

    #[error("moment system is numerically singular (condition number {cond:e})")]
    SingularSystem { cond: f64 },

    #[error("kernel normalizer {normalizer:e} underflows at tau = {tau}")]
    DegenerateWeights { tau: f64, normalizer: f64 },

    #[error("one-sided estimator at grid index {index} has no terms on the requested side")]
    EmptySide { index: usize },

    #[error("invalid two-scale parameters: k = {k}, b = {b}, n = {n} (need k >= 2 and 2b + k < n)")]
    InvalidScales { k: usize, b: usize, n: usize },

    #[error("bandwidth denominator is not positive ({0:e})")]
    NonpositiveDenominator(f64),

    #[error("volatility-of-volatility estimate is degenerate ({0:e}) even after fallback")]
    VolVolDegenerate(f64),

    #[error("step coefficients have (near) zero mass: sum = {0:e}")]
    ZeroMass(f64),

    #[error("circulant embedding eigenvalue {0:e} is below the clamp threshold")]
    EmbeddingNotPsd(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by user configuration rather than data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidScales { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

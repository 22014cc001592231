use thiserror::Error;

/// Errors raised by the dependence-measure and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimates lie on the boundary of the parameter space: {0}")]
    Boundary(String),

    #[error("bandwidth {bandwidth} must be smaller than the sample size {n}")]
    Bandwidth { bandwidth: usize, n: usize },

    #[error("singular Jacobian: {0}")]
    Singular(String),

    #[error("covariance matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid sample: {0}")]
    Sample(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

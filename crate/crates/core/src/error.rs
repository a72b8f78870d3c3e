use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrmError {
    #[error("{what} is outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("representation {rep} is not available for {target}")]
    Incompatible { rep: String, target: String },

    #[error("error bound {eps} is not reached for any K up to {k_max}")]
    Unreachable { eps: f64, k_max: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, CrmError>;

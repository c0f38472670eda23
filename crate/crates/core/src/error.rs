use thiserror::Error;

use crate::params::ValidationReport;

/// Errors surfaced by the solvers and parsers in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("missing config key `{0}`")]
    MissingKey(String),

    #[error("inadmissible parameters:\n{0}")]
    InvalidParams(ValidationReport),

    #[error("{what} must be positive, got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("{stage} did not converge (best residual {best_residual:.3e}): {detail}")]
    NonConvergence {
        stage: &'static str,
        best_residual: f64,
        detail: String,
    },

    #[error("internal numerical failure in {stage}: {detail}")]
    Numerical { stage: &'static str, detail: String },

    #[error("heavy tail: moment of order {order} diverges (theta2 = {theta2:.6})")]
    DivergentMoment { order: u32, theta2: f64 },
}

impl Error {
    pub(crate) fn numerical(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            stage,
            detail: detail.into(),
        }
    }

    /// Short machine-readable tag, used in sweep output rows.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::MissingKey(_) => "config",
            Error::InvalidParams(_) => "invalid_params",
            Error::Domain { .. } => "domain",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Numerical { .. } => "numerical",
            Error::DivergentMoment { .. } => "divergent_moment",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

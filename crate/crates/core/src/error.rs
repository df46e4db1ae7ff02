use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("length mismatch: expected horizon {expected}, got {got}")]
    Horizon { expected: usize, got: usize },

    #[error("stage {stage} outside 1..={horizon}")]
    StageOutOfRange { stage: usize, horizon: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64, last_iterate: Vec<f64> },

    #[error("supremum is unbounded: {0}")]
    Unbounded(String),

    #[error("initialization oracle failed at stage {stage}: {source}")]
    Oracle {
        stage: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures rooted in bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::InvalidParameter(_)
            | Error::Dimension { .. }
            | Error::Horizon { .. }
            | Error::Io(_)
            | Error::Csv(_) => true,
            Error::Oracle { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

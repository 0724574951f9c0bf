use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain mismatch: expected {expected}, found {found}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error(
        "truncation risk: endpoint magnitudes {left:.3e} (left) and {right:.3e} (right) \
         exceed {tol:.1e} of the peak magnitude {peak:.3e}"
    )]
    TruncationRisk {
        left: f64,
        right: f64,
        peak: f64,
        tol: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-integrable potential: {0}")]
    NonIntegrable(String),

    #[error("membership check '{check}' failed: {detail}")]
    Membership { check: String, detail: String },

    #[error("class mismatch: {0}")]
    ClassMismatch(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("numerical instability: {0}")]
    Instability(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Membership { .. }
            | Error::ClassMismatch(_)
            | Error::InvalidInput(_)
            | Error::InvalidGrid(_)
            | Error::DomainMismatch { .. }
            | Error::TruncationRisk { .. }
            | Error::NonIntegrable(_)
            | Error::Parse(_) => 2,
            Error::NonConvergence(_) | Error::Instability(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

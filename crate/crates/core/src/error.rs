use thiserror::Error;

/// Errors produced by the numerical engine and the batch front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("multi-exponential fit failed: best relative residual {residual:.3e} exceeds threshold {threshold:.3e} (K = {term_count})")]
    FitFailed {
        residual: f64,
        threshold: f64,
        term_count: usize,
    },

    #[error("integration diverged at t = {time}: {quantity} reached {value:.3e}")]
    IntegrationDiverged {
        time: f64,
        quantity: &'static str,
        value: f64,
    },

    #[error("no admissible initial guess: {0}")]
    NoAdmissibleGuess(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::FitFailed { .. } => "FitFailed",
            Error::IntegrationDiverged { .. } => "IntegrationDiverged",
            Error::NoAdmissibleGuess(_) => "NoAdmissibleGuess",
            Error::Config { .. } => "ConfigError",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the controller, its math kernels and the scenario harness.
#[derive(Debug, Error)]
pub enum UtcError {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is indefinite (min eigenvalue {min_eigenvalue:e})")]
    Indefinite { min_eigenvalue: f64 },

    #[error("invalid center weight W0 = {0} (must satisfy 0 <= W0 < 1)")]
    InvalidWeight(f64),

    #[error("output covariance is numerically singular at step {step}: {detail}")]
    SingularInnovation { step: usize, detail: String },

    #[error("input too short: {len} samples, horizon needs more than {horizon}")]
    InputTooShort { len: usize, horizon: usize },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl UtcError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        UtcError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        UtcError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures that originate in the numerics rather than in user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            UtcError::NotSymmetric { .. }
                | UtcError::Indefinite { .. }
                | UtcError::SingularInnovation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, UtcError>;

use thiserror::Error;

use crate::numerics::NumericsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a constraint; `key` is the dotted
    /// config path.
    #[error("{key}: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("simulation diverged at t = {t} (state norm {norm:e})")]
    Divergence { t: f64, norm: f64 },
    #[error("non-finite {component} derivative at t = {t}")]
    NonFinite { component: &'static str, t: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Config key named by a validation error.
    pub fn key(&self) -> Option<&str> {
        match self {
            Error::Config { key, .. } => Some(key),
            _ => None,
        }
    }

    /// True for numerical blow-up during integration.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NonFinite { .. }
                | Error::Numerics(NumericsError::NonFiniteDerivative { .. })
        )
    }
}

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("size guard: {what} ({size} > {limit})")]
    SizeGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the operation.
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The Fourier truncation cannot represent the requested operator.
    #[error("resolution error: {reason} (required modes: {required}, given: {given})")]
    Resolution {
        reason: &'static str,
        required: usize,
        given: usize,
    },

    /// A bracketing search hit its cap before the quantity crossed the target.
    #[error("no crossing found before t_cap = {cap:.6e} (last bracket [{lo:.6e}, {hi:.6e}])")]
    Timeout { lo: f64, hi: f64, cap: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

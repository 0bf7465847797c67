use std::path::PathBuf;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The caller violated a documented precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// The requested combination of inputs is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine could not produce a trustworthy answer.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An enumeration would exceed its configured size cap.
    #[error("family of {required:.3e} members exceeds the cap of {cap}; rerun with a cap of at least {required:.0}")]
    Capacity { required: f64, cap: u64 },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// An experiment replication failed; carries the grid position.
    #[error("replication failed (n = {n}, rep = {rep}): {source}")]
    Replication {
        n: usize,
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

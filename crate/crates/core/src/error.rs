//! Error type shared by every module.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Input-validation failures carry enough context to tell the caller which
/// precondition was violated; numerical failures describe what broke.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on scalar or vector inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Grid construction or a grid/region pairing failed.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A region does not consist of whole grid cells.
    #[error("region is not cell-aligned: {0}")]
    NotCellAligned(String),

    /// A grid and a potential / geometry do not belong together.
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    /// The sign-change counter was handed an all-zero vector.
    #[error("cannot count sign changes of an all-zero vector")]
    AllZero,

    /// An eigenvalue that must be simple is (numerically) degenerate.
    #[error("degenerate eigenvalue: {0}")]
    Degenerate(String),

    /// A quantity that must be one-signed is not.
    #[error("not one-signed: {0}")]
    NotOneSigned(String),

    /// A matrix that must be positive definite is not.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The rescaled operator was requested outside its admissible range.
    #[error("epsilon {eps} too large: requires eps * 2 / min|x_i - x_j| < 1 (got {value:.6})")]
    EpsilonTooLarge {
        /// Requested half-width / rescaling parameter.
        eps: f64,
        /// The value of `eps * 2 / min|x_i - x_j|`.
        value: f64,
    },

    /// Configuration parsing or validation failed.
    #[error("config error: {0}")]
    Config(String),

    /// An I/O failure while reading input or writing artifacts.
    #[error("i/o error on {path}: {source}")]
    Io {
        /// File or directory involved.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },

    /// Serialization of an artifact failed.
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    /// Shorthand for [`Error::InvalidInput`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps an I/O error with the path it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the caller's input (as opposed to
    /// numerical breakdown or the environment).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InvalidGrid(_)
                | Error::NotCellAligned(_)
                | Error::GeometryMismatch(_)
                | Error::AllZero
                | Error::EpsilonTooLarge { .. }
                | Error::Config(_)
        )
    }
}

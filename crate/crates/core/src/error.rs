use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The predicted class never activated any penultimate neuron during
    /// matrix construction, so its commonality score has no denominator.
    #[error("commonality score undefined: class {class} has an all-zero activation column")]
    UndefinedScore { class: usize },

    #[error("rarity ratio undefined: common-case misclassification rate is zero")]
    UndefinedRatio,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("model fingerprint mismatch: monitor expects {expected:016x}, model file hashes to {actual:016x}")]
    FingerprintMismatch { expected: u64, actual: u64 },
}

/// Reads a UTF-8 text file; undecodable bytes are a format error.
pub(crate) fn read_text(path: &std::path::Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|_| Error::format(format!("{}: not UTF-8 text", path.display())))
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// True for errors caused by bad caller input (flags, files, shapes)
    /// rather than by a failure inside the pipeline.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::DimensionMismatch { .. }
                | Error::Format(_)
                | Error::Io { .. }
                | Error::FingerprintMismatch { .. }
        )
    }
}

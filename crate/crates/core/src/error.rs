//! Crate-wide error type.
//!
//! Variants are grouped so the CLI can map them onto coarse exit codes:
//! configuration problems, missing or unreadable inputs, and numeric or
//! training failures.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes fed to a numeric operation do not line up.
    #[error("dimension mismatch in {op}: {details}")]
    Dimension { op: &'static str, details: String },

    /// A file exists but its contents are not what the parser expects.
    #[error("failed to parse {path}: {details}")]
    Parse { path: PathBuf, details: String },

    /// A class label lies outside the classifier's output range.
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    /// A signal row has (near-)zero power and cannot be normalized.
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    /// A configuration value is invalid or inconsistent.
    #[error("invalid config: {0}")]
    Config(String),

    /// Training diverged or failed to reach a usable state.
    #[error("training failure: {0}")]
    Training(String),

    /// A required input file or directory is absent.
    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn dimension(op: &'static str, details: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            details: details.into(),
        }
    }

    pub fn parse(path: impl Into<PathBuf>, details: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            details: details.into(),
        }
    }
}

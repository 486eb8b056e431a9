use std::path::PathBuf;

use thiserror::Error;

/// Parse failures for the on-disk formats. Each malformed condition has its own variant.
#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("not a PFM file")]
    NotPfm,
    #[error("not a binary PGM (P5) file")]
    NotPgm,
    #[error("ASCII PGM (P2) is not supported")]
    AsciiPgm,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("PGM maxval {0} exceeds 65535")]
    MaxvalTooLarge(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("line {line}: {message}")]
    Obj { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("scene schema: {0}")]
    Schema(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{what} diverged at epoch {epoch}")]
    Divergence { what: &'static str, epoch: usize },
    #[error("non-finite gradient in {texture} texture at texel ({x}, {y})")]
    NonFiniteGradient {
        texture: &'static str,
        x: usize,
        y: usize,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, source: FormatError) -> Self {
        Error::Format {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's data rather than by the engine.
    pub fn is_bad_input(&self) -> bool {
        matches!(
            self,
            Error::Format { .. }
                | Error::MissingFile(_)
                | Error::Schema(_)
                | Error::InvalidInput(_)
                | Error::ShapeMismatch(_)
        )
    }

    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;

/// Everything that can go wrong across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (bad field values, malformed config file).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed data in an artifact file, with its location.
    #[error("parse error in {path}, line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// An artifact required by a stage is missing; names the stage that
    /// produces it.
    #[error("missing artifact {path}: run stage `{stage}` first")]
    MissingArtifact { stage: &'static str, path: PathBuf },

    /// API misuse: inconsistent arguments, stepping a finished episode, etc.
    #[error("usage error: {0}")]
    Usage(String),

    /// Data-level failure that is not tied to one file location.
    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; carries the stage name and the cause.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for any stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    /// Label an error with the stage it surfaced in. Keeps the cause (and
    /// its exit code) intact.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }

    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

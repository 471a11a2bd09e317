use std::time::Duration;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input could not be parsed at all (broken JSON, truncated PNG, ...).
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// The input parsed but violates the documented schema or a type invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Invalid geometric input (degenerate polygon, empty box, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Invalid metric input (shape mismatch, no evaluable classes, ...).
    #[error("metrics error: {0}")]
    Metrics(String),

    /// An inference adapter broke the wire protocol.
    #[error("adapter protocol violation: {0}")]
    Protocol(String),

    /// An inference adapter did not answer in time.
    #[error("adapter timed out after {0:?}")]
    Timeout(Duration),

    /// An error that occurred in a named pipeline stage.
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("png error: {0}")]
    Png(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

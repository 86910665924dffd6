use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Network or layer geometry that cannot be built or evaluated.
    #[error("configuration error at layer {layer}: {reason}")]
    LayerConfig { layer: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual} ({context})")]
    Shape {
        expected: usize,
        actual: usize,
        context: String,
    },

    #[error("stale or mismatched forward cache: {0}")]
    StaleCache(String),

    #[error("non-finite value in layer {layer} ({what})")]
    NonFinite { layer: usize, what: String },

    #[error("training diverged: non-finite loss at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing keypoints in frames {frames:?}: {reason}")]
    MissingKeypoints { frames: Vec<usize>, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("schema error in {file} at row {row}, column {column}: {reason}")]
    Schema {
        file: String,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("dataset error for instance {instance}: {reason}")]
    Dataset { instance: String, reason: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: usize, actual: usize, context: impl Into<String>) -> Self {
        Error::Shape {
            expected,
            actual,
            context: context.into(),
        }
    }

    /// Wraps `self` with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}

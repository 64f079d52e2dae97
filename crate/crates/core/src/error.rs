use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("non-finite coordinate at ({t}, {joint}, {axis})")]
    NonFiniteCoordinate { t: usize, joint: usize, axis: usize },

    #[error("invalid joint map: {0}")]
    InvalidJointMap(String),

    #[error("degenerate pose: {0}")]
    DegeneratePose(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("cannot normalize constant data (min = max = {0})")]
    ConstantData(f64),

    #[error("decoder strategy mismatch: expected {expected}, got {got}")]
    StrategyMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("all frames are masked")]
    AllMasked,

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("non-finite loss")]
    NonFiniteLoss,

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("non-finite parameter update")]
    NonFiniteUpdate,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

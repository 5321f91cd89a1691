use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("channel `{channel}` has no `{measurement}` column")]
    MissingColumn { channel: String, measurement: String },

    #[error("no houses found in {0}")]
    NoHouses(PathBuf),

    #[error("missing labels file {0}")]
    MissingLabels(PathBuf),

    #[error("no mains energy")]
    NoMainsEnergy,

    #[error("empty model set: no appliance qualifies")]
    EmptyModelSet,

    #[error("upsampling not supported here: period {requested}s is below nominal period {nominal}s")]
    Upsampling { requested: f64, nominal: f64 },

    #[error("building not aligned: {0}")]
    NotAligned(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("{states} state combinations exceed the limit of {limit}; filter to the top-k appliances first")]
    StateSpaceLimit { states: u128, limit: u128 },

    #[error("predictions and ground truth share no timestamps")]
    EmptyIntersection,

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tags the error with the pipeline stage it came from. Config errors
    /// stay untagged so callers can tell them apart.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        match self {
            Error::Config(_) | Error::Stage { .. } => self,
            other => Error::Stage {
                stage: stage.into(),
                source: Box::new(other),
            },
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("parameter error: {0}")]
    Param(String),

    #[error("shape mismatch at {junction}: expected {expected:?}, got {got:?}")]
    Shape {
        junction: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt weight file: {0}")]
    Corrupt(String),

    #[error("weight schema error: {0}")]
    Schema(String),

    #[error("incomplete weights, missing tensors: {}", .0.join(", "))]
    IncompleteWeights(Vec<String>),

    #[error("weight metadata does not match model config: {0}")]
    ConfigMismatch(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(junction: impl Into<String>, expected: &[usize], got: &[usize]) -> Self {
        Error::Shape {
            junction: junction.into(),
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index:?} out of bounds for dims {dims:?}")]
    Bounds { index: Vec<usize>, dims: Vec<usize> },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("optimisation diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn bounds(index: &[usize], dims: &[usize]) -> Self {
        Error::Bounds {
            index: index.to_vec(),
            dims: dims.to_vec(),
        }
    }
}

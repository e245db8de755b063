use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("derivative order {requested} not available (max {available})")]
    UnsupportedOrder { requested: usize, available: usize },

    #[error("kernel evaluated at coincident points")]
    SingularPoint,

    #[error("chart is degenerate at (u, v) = ({u}, {v})")]
    DegenerateChart { u: f64, v: f64 },

    #[error("numeric failure: {message} [{context}]")]
    NumericFailure { message: String, context: String },

    #[error("insufficient data: {usable} usable points, {required} required")]
    InsufficientData { usable: usize, required: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

use thiserror::Error;

/// Errors raised by the evaluation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),
    #[error("training diverged: {0} (try a smaller learning_rate)")]
    Divergence(String),
    #[error("fleiss kappa undefined: expected chance agreement is 1")]
    UndefinedKappa,
    #[error("unfitted combiner: {0}")]
    UnfittedCombiner(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("parse error: {0}")]
    Format(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("join error: {0}")]
    Join(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by invalid caller-supplied settings rather than data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

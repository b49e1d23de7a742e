use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate split ({strategy}, k={k}): {reason}")]
    DegenerateSplit {
        strategy: String,
        k: usize,
        reason: String,
    },

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("{}:{line}: {message}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<input>".into()))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line,
            message: message.into(),
        }
    }

    /// Attach a file path to a parse error.
    pub fn in_file(self, file: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                path: Some(file.into()),
                line,
                message,
            },
            other => other,
        }
    }

    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::DegenerateSplit { .. } | Error::DegenerateClustering(_) => 3,
            Error::ReplayMismatch(_) => 4,
            _ => 1,
        }
    }

    /// Short machine-readable kind used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::DegenerateSplit { .. } => "degenerate_split",
            Error::DegenerateClustering(_) => "degenerate_clustering",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::EmptyInput(_) => "empty_input",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::Parse { .. } => "parse",
            Error::ReplayMismatch(_) => "replay_mismatch",
            Error::Io(_) => "io",
        }
    }
}

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: label column `{column}` not found")]
    MissingLabelColumn { path: PathBuf, column: String },
    #[error("config: {0}")]
    Config(String),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("table parse: {0}")]
    TableParse(String),
    #[error(transparent)]
    Core(#[from] peerfed_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems map to exit code 1, everything else to 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnknownDataset(_) | Error::MissingLabelColumn { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] metalseg::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{name}: {source}")]
    Image {
        name: String,
        #[source]
        source: metalseg::Error,
    },

    #[error("{} has no counterpart in {}", orphan.display(), missing_in.display())]
    Orphan { orphan: PathBuf, missing_in: PathBuf },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_owned(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Image { source, .. } => source.kind(),
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Orphan { .. } => "orphan",
            CliError::Usage(_) => "usage",
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Core(metalseg::Error::Provider { provider, request_id, .. }) = self {
            v["provider"] = json!(provider);
            v["request_id"] = json!(request_id);
        }
        if let CliError::Core(metalseg::Error::Format { offset, .. }) = self {
            v["offset"] = json!(offset);
        }
        v.to_string()
    }
}

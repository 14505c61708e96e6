// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use crate::bundle::BundleError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing input {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{} already exists; run directories are append-only", .0.display())]
    AlreadyExists(PathBuf),
    #[error("{}: {source}", path.display())]
    Bundle {
        path: PathBuf,
        source: BundleError,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] saif_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short category label printed with CLI failures.
    pub fn category(&self) -> &'static str {
        match self {
            Error::MissingInput(_) => "missing-input",
            Error::AlreadyExists(_) => "already-exists",
            Error::Bundle { .. } | Error::Parse { .. } | Error::Format(_) | Error::Json(_) | Error::Csv(_) => {
                "format"
            }
            Error::Core(_) => "invariant",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code for the category. Usage errors exit with 2 via clap.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "missing-input" => 3,
            "format" => 4,
            "invariant" => 5,
            "io" => 6,
            "already-exists" => 7,
            _ => 1,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

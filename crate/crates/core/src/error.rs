use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Column layout or attribute declaration problem.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell could not be interpreted. `row` is the 0-based data row.
    #[error("value error at row {row}, column `{column}`: {message}")]
    Value {
        row: usize,
        column: String,
        message: String,
    },

    /// Caller violated an operation precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// The requested coverage or budget cannot be met.
    #[error("infeasible: {message}{}", list_uncovered(.uncovered))]
    Infeasible {
        message: String,
        uncovered: Vec<usize>,
    },

    /// Exact search refused because the instance exceeds the configured cap.
    #[error("exact search over {relevant} candidates exceeds cap {cap}; use the greedy method")]
    Capacity { relevant: usize, cap: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn list_uncovered(ids: &[usize]) -> String {
    if ids.is_empty() {
        String::new()
    } else {
        format!(" (uncovered: {ids:?})")
    }
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wrap with the name of the pipeline stage that failed.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

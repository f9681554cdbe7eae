use std::path::PathBuf;

use thiserror::Error;

/// A single malformed record found while reading a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordIssue {
    pub path: PathBuf,
    /// 1-based line number, 0 when the issue concerns the whole file.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RecordIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.path.display(), self.message)
        } else {
            write!(f, "{}:{}: {}", self.path.display(), self.line, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("enumeration budget exceeded: {paths} hidden paths > limit {limit}")]
    BudgetExceeded { paths: u128, limit: u128 },

    #[error("non-finite objective at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },

    #[error("{} malformed record(s):\n{}", .0.len(), format_issues(.0))]
    Malformed(Vec<RecordIssue>),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_issues(issues: &[RecordIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(format!($($arg)*))
    };
}
pub(crate) use invalid;

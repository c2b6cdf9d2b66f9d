use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid graph: {0}")]
    Validation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("linear system is singular at pivot {0}")]
    Singular(usize),
    #[error("ppr row {source_node} did not converge in {iterations} iterations (last residual {residual:e})")]
    NotConverged {
        source_node: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("no remaining cross-label node pairs to connect ({added} of {requested} edges added)")]
    Saturated { requested: usize, added: usize },
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("corrupt file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

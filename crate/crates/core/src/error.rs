use std::io;

use thiserror::Error;

/// Errors produced anywhere in the workbench.
///
/// The CLI maps each variant onto an exit code with [`QppError::exit_code`].
#[derive(Debug, Error)]
pub enum QppError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("degenerate division: {0}")]
    DegenerateDivision(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite loss {loss} (lr {lr:e}, step {step}, group {group})")]
    NonFinite {
        loss: f64,
        lr: f64,
        step: usize,
        group: usize,
    },

    #[error("stage '{stage}' failed on split {split}: {source}")]
    Stage {
        stage: String,
        split: usize,
        #[source]
        source: Box<QppError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = QppError> = std::result::Result<T, E>;

impl QppError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        QppError::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        QppError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 2 for data problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            QppError::DegenerateVariance(_)
            | QppError::DegenerateDivision(_)
            | QppError::NonFinite { .. }
            | QppError::Shape { .. }
            | QppError::Contract(_) => 3,
            QppError::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

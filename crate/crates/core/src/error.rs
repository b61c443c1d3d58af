use thiserror::Error;

pub type Result<T> = std::result::Result<T, AstmError>;

#[derive(Debug, Error)]
pub enum AstmError {
    #[error("invalid lattice config: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{kind} file format error at line {line}: {msg}")]
    Format {
        kind: &'static str,
        line: usize,
        msg: String,
    },

    #[error("unsupported method for {operation}: {method}")]
    UnsupportedMethod {
        operation: &'static str,
        method: String,
    },

    #[error("capacity bracket failure: corruption probability {p} exceeds target {target} already at Q = 1")]
    BracketFailure { p: f64, target: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl AstmError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        AstmError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(kind: &'static str, line: usize, msg: impl Into<String>) -> Self {
        AstmError::Format {
            kind,
            line,
            msg: msg.into(),
        }
    }
}

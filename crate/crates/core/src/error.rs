use std::path::PathBuf;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({n_rows}x{n_cols})")]
    NotSquare { n_rows: usize, n_cols: usize },

    #[error("matrix is singular at pivot row {row}")]
    Singular { row: usize },

    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),

    #[error("inconsistent block layout: {0}")]
    BlockLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("functions live on different finite-element spaces")]
    SpaceMismatch,

    #[error("coefficient chi out of [0, 1] at node {node}: {value}")]
    InadmissibleChi { node: usize, value: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

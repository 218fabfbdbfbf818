use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("unknown or invalid preset: {0}")]
    Preset(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("internal solver error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer shapes are incompatible.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A row that must have positive L2 norm is (numerically) zero.
    #[error("zero-norm row {row}: {context}")]
    ZeroNorm { row: usize, context: String },

    /// A loss or intermediate value is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A binary or JSON artifact violates its documented format.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

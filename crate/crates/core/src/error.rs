use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is indefinite (eigenvalue {eigenvalue:e} below clamp threshold)")]
    Indefinite { eigenvalue: f64 },

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dictionary column {0} is zero")]
    ZeroColumn(usize),

    #[error("circulant spectrum has a zero eigenvalue at bin {0}")]
    ZeroEigenvalue(usize),

    #[error("factor is singular")]
    Singular,

    #[error("exhaustive search limited to {limit} columns, got {columns}")]
    TooManyColumns { columns: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

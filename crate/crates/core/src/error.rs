use thiserror::Error;

/// Errors raised by the numerical kernels and solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerically singular matrix in {context} (smallest pivot {pivot:.3e})")]
    Singular { context: String, pivot: f64 },

    #[error("direct solve in {context} left relative residual {residual:.3e}")]
    Inaccurate { context: String, residual: f64 },

    #[error("sample at index {index:?} is not finite")]
    Sampling { index: Vec<usize> },

    #[error("problem dimension {requested} exceeds the cap of {cap}; {hint}")]
    DimensionCap { requested: usize, cap: usize, hint: &'static str },

    #[error("entry ({row}, {col}) lies outside the declared band (lower {lower}, upper {upper})")]
    Band { row: usize, col: usize, lower: usize, upper: usize },

    #[error("rank collapse: {0}")]
    RankCollapse(String),

    #[error("point {0} lies inside the source box")]
    Domain(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter { name, reason: reason.into() }
}

use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("rank bound {r} out of range for a {rows}x{cols} matrix")]
    RankOutOfRange { r: usize, rows: usize, cols: usize },

    #[error("index-set enumeration would produce {count} sets (cap {cap})")]
    SizeCap { count: u128, cap: usize },

    #[error("intersection rule not certified at this point: {0}")]
    NotCertified(String),

    #[error("operation requires the {expected} case (s = {s}, r = {r})")]
    WrongCase { expected: &'static str, s: usize, r: usize },

    #[error("point is not F-stationary (residual {residual:.3e})")]
    NotStationary { residual: f64 },

    #[error("step size must be positive, got {0}")]
    InvalidAlpha(f64),

    #[error("solver diverged at iteration {iter} (objective {value:.3e})")]
    Divergence { iter: usize, value: f64 },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(expected: (usize, usize), found: (usize, usize)) -> Error {
    Error::ShapeMismatch {
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}

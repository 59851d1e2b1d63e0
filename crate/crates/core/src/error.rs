use thiserror::Error;

/// Errors raised across the operator, design and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("refusing to materialize a {rows}x{cols} operator (cap is {cap} entries)")]
    MaterializeCap { rows: usize, cols: usize, cap: usize },

    #[error("singular operator: {0}")]
    Singular(String),

    #[error("conjugate gradient detected nonpositive curvature {curvature:e} at iteration {iteration}")]
    NegativeCurvature { iteration: usize, curvature: f64 },

    #[error("SQS fast path requested but H has a negative entry {value:e} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("every coefficient of the cubic is zero")]
    DegeneratePolynomial,

    #[error("majorization violated: {0}")]
    MajorizationViolated(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

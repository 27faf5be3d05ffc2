use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains no usable records")]
    EmptyInput,

    #[error("required column `{0}` not found in header")]
    MissingColumn(String),

    #[error("coordinate spread {spread:.3} degrees exceeds the {limit} degree limit for planar projection")]
    SpreadTooLarge { spread: f64, limit: f64 },

    #[error("point set has zero coordinate variance; bandwidth is undefined")]
    DegenerateVariance,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("{n} points exceed the {max} point distance matrix budget; sample the data down first")]
    MatrixBudget { n: usize, max: usize },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("sample of {requested} requested from only {available} points")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("reachability oracle limited to {max} points, got {n}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

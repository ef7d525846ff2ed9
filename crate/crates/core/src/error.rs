use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid index pattern `{pattern}`: {rule}")]
    InvalidPattern { pattern: String, rule: String },

    #[error("pattern needs {needed} distinct indices but N = {n}")]
    TooFewIndices { needed: usize, n: usize },

    #[error("correction order {0} has no closed form; supply a coefficient table")]
    UnsupportedOrder(usize),

    #[error("coefficient table: {0}")]
    CoefficientTable(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate self-consistent model: {0}")]
    DegenerateModel(String),

    #[error("branch tracking failed at z = {re} + {im}i: {reason}")]
    Branch { re: f64, im: f64, reason: String },

    #[error("eigensolver did not converge: {0}")]
    Eigen(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("too many degenerate samples: {failed} of {total}")]
    TooManyDegenerate { failed: usize, total: usize },

    #[error("report integrity: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

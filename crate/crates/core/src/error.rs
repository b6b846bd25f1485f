use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exposure values are degenerate (all equal to {0})")]
    DegenerateExposure(f64),

    #[error("invalid basis size: {num_basis} functions of degree {degree} (need at least degree + 1)")]
    InvalidBasisSize { num_basis: usize, degree: usize },

    #[error("too few observations: {n} rows for a basis of size {num_basis} (need at least {needed})")]
    TooFewObservations { n: usize, num_basis: usize, needed: usize },

    #[error("exposure value {value} outside support [{lo}, {hi}]")]
    OutOfSupport { value: f64, lo: f64, hi: f64 },

    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: String, row: usize },

    #[error("singular design for covariate {0}")]
    SingularDesign(usize),

    #[error("singular joint design on {0} groups after ridge fallback")]
    SingularJointDesign(usize),

    #[error("conditioning fit failed: {0}")]
    ConditioningFitFailed(String),

    #[error("need at least {needed} candidates, got {got}")]
    InsufficientCandidates { needed: usize, got: usize },

    #[error("unknown covariate index {0}")]
    UnknownIndex(usize),

    #[error("every lambda on the grid failed: {0}")]
    AllLambdaFailed(String),

    #[error("iteration {iteration} failed: {source}")]
    IterationFailed {
        iteration: usize,
        source: Box<Error>,
        trace: Box<crate::inis::InisTrace>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("missing columns: {0:?}")]
    MissingColumns(Vec<String>),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

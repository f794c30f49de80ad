use thiserror::Error;

/// Errors raised by the numerical kernels, regressors and data generators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("all columns are numerically zero; the orthonormal basis is empty")]
    EmptyBasis,

    #[error("design matrix is rank deficient: column {column} is dependent on earlier columns")]
    RankDeficient { column: usize },

    #[error("target vector has zero norm")]
    ZeroTarget,

    #[error("column '{label}' has zero norm and cannot be normalized")]
    ZeroColumn { label: String },

    #[error("index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("columns are not unit-normalized (column {column} has norm {norm})")]
    NotNormalized { column: usize, norm: f64 },

    #[error("exhaustive search budget exceeded at level {level}: {count} subsets (cap {cap})")]
    BudgetExceeded { level: usize, count: u128, cap: u128 },

    #[error("no score jump found in trace; use the threshold policy instead")]
    NoJump,

    #[error("cross-validation training block has {rows} rows but the library has {cols} columns")]
    FoldTooSmall { rows: usize, cols: usize },

    #[error("test function support of {points} grid points is shorter than the required {required}")]
    SupportTooShort { points: usize, required: usize },

    #[error("derivative order {order} exceeds test function smoothness {smoothness}")]
    DerivativeOrder { order: usize, smoothness: usize },

    #[error("state became non-finite at t = {time}")]
    BlowUp { time: f64 },

    #[error("requested time {time} is not before the shock time {shock_time}")]
    PastShock { time: f64, shock_time: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared by every module in the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// No rows with treatment indicator 1.
    #[error("treatment group is empty")]
    EmptyTreatmentGroup,

    /// No rows with treatment indicator 0.
    #[error("control group is empty")]
    EmptyControlGroup,

    /// Two containers that must agree in shape do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An operation received zero rows.
    #[error("input is empty")]
    EmptyInput,

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    /// CSV header does not match the documented schema.
    #[error("{path}: schema mismatch: {detail}")]
    SchemaMismatch { path: PathBuf, detail: String },

    /// A data row failed to parse; `row` is 1-based and counts data rows.
    #[error("row {row}: cannot parse field '{field}': {detail}")]
    RowParseError {
        row: usize,
        field: String,
        detail: String,
    },

    /// A lookup table has no entry for a country referenced by a loan.
    #[error("table '{table}' has no entry for country '{country}'")]
    MissingCountryData { country: String, table: &'static str },

    /// A numeric column has zero variance and cannot be standardized.
    #[error("column '{0}' is constant; cannot standardize")]
    ConstantColumn(String),

    /// A train/test split left one side unusable.
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    /// Design matrix is rank deficient beyond the accepted condition bound.
    #[error("design matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularDesign { condition: f64 },

    /// Fewer rows than columns; the fit is underdetermined.
    #[error("too few rows: n={n} must exceed p={p}")]
    TooFewRows { n: usize, p: usize },

    /// Binary labels contain only one class.
    #[error("labels contain a single class")]
    SingleClassInput,

    /// Logistic coefficients grew without bound; data look separable.
    #[error("logistic fit diverged; classes appear separable")]
    DivergedSeparableData,

    /// Prediction input columns do not match the fitted columns.
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    /// Two paired vectors differ in length.
    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// A posterior summary was requested from zero retained draws.
    #[error("no posterior draws")]
    EmptyDraws,

    /// A conditional covariance factorization failed.
    #[error("posterior precision matrix is not positive definite")]
    NumericalSingularity,

    /// Hyperparameters or a synthetic generator spec violate their bounds.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Simulated treatment assignment produced a single class repeatedly.
    #[error("treatment draw degenerate after {0} attempts")]
    DegenerateTreatment(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum SpinexError {
    // data ingestion
    #[error("target column `{0}` not found in header")]
    MissingTargetColumn(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("cannot parse cell at row {row}, column {col}: `{value}`")]
    UnparseableCell { row: usize, col: usize, value: String },
    #[error("file has no header or no rows")]
    EmptyFile,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("column {0} has no observed values")]
    AllMissingColumn(usize),
    #[error("outlier filtering would remove every row")]
    AllRowsRemoved,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("query row {0} contains missing values")]
    MissingInQuery(usize),

    // shapes and arguments
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("kernel width must be positive, got {0}")]
    NonPositiveKernelWidth(f64),
    #[error("operation requires a {expected} model")]
    TaskMismatch { expected: &'static str },
    #[error("{prioritized} prioritized features exceed the {budget} features to select")]
    TooManyPrioritizedFeatures { prioritized: usize, budget: usize },

    // explanations
    #[error("feature index {index} out of range for {n_features} features")]
    InvalidFeatureIndex { index: usize, n_features: usize },
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("{count} feature combinations exceed the budget of {budget}")]
    CombinationBudgetExceeded { count: usize, budget: usize },
    #[error("empty range [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },

    // ensembles
    #[error("boosting could not produce a usable first round")]
    DegenerateRound,
    #[error("{rows} rows cannot be split into {folds} folds")]
    TooFewRowsForFolds { rows: usize, folds: usize },

    // generators
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("family `{family}` needs at least {needed} features, got {got}")]
    FamilyNeedsMoreFeatures { family: &'static str, needed: usize, got: usize },

    // metrics and ranking
    #[error("actual values are constant; R² is undefined")]
    ConstantActuals,
    #[error("probability row {0} is invalid")]
    InvalidProbabilityRow(usize),
    #[error("label {label} out of range for {n_classes} classes")]
    InvalidLabel { label: usize, n_classes: usize },
    #[error("both classes must be present")]
    SingleClassPresent,
    #[error("no record for model `{model}` on dataset `{dataset}`")]
    MissingCell { model: String, dataset: String },
    #[error("metric `{0}` missing from record")]
    MissingMetric(String),

    // cross-validation
    #[error("{rows} rows cannot form {folds} folds")]
    TooFewRows { rows: usize, folds: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl SpinexError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SpinexError::Io { path: path.into(), source }
    }

    /// Whether the error stems from the input data rather than from the computation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            SpinexError::MissingTargetColumn(_)
                | SpinexError::MissingColumn(_)
                | SpinexError::UnparseableCell { .. }
                | SpinexError::EmptyFile
                | SpinexError::InvalidDataset(_)
                | SpinexError::AllMissingColumn(_)
                | SpinexError::AllRowsRemoved
                | SpinexError::EmptyDataset
                | SpinexError::MissingInQuery(_)
                | SpinexError::Io { .. }
                | SpinexError::Csv(_)
                | SpinexError::Serde(_)
        )
    }
}

pub type Result<T, E = SpinexError> = std::result::Result<T, E>;

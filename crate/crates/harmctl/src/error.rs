//! Error type shared across the crate.
//!
//! Errors fall into three groups that the CLI maps onto its exit-code
//! contract: configuration problems (exit 1), infeasible calibration
//! requests (exit 2), and data problems (exit 3).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("row {row}: score {value} for label `{label}` outside [0, 1]")]
    ScoreOutOfRange { row: usize, label: String, value: f64 },

    #[error("duplicate instance id `{0}`")]
    DuplicateInstance(String),

    #[error("row {row}: unknown label `{name}`")]
    UnknownLabel { row: usize, name: String },

    #[error("instance `{0}` carries conflicting ground-truth labels")]
    TrueLabelConflict(String),

    #[error("prediction references instance `{0}` with no score vector")]
    OrphanPrediction(String),

    #[error("prediction references instance `{0}` with no ground-truth label")]
    MissingTrueLabel(String),

    #[error("row {row}: invalid prediction-set record: {reason}")]
    InvalidSetRecord { row: usize, reason: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("lambda {0} outside the predictor domain [0, {1}]")]
    LambdaOutOfRange(f64, f64),

    #[error("empty grid")]
    EmptyGrid,

    #[error("alpha {alpha} below the achievable floor {floor} for n = {n} calibration samples")]
    AlphaTooSmall { alpha: f64, n: usize, floor: f64 },

    #[error("no lambda satisfies the risk condition, even at lambda = 0")]
    Infeasible,

    #[error(
        "invalid alpha split: need 1/(n+1) <= alpha' and 1/(n+1) <= alpha - alpha' \
         (alpha = {alpha}, alpha' = {alpha_prime}, n = {n})"
    )]
    AlphaSplitInvalid { alpha: f64, alpha_prime: f64, n: usize },

    #[error("stratum {0} contains no predictions")]
    EmptyStratum(usize),

    #[error("confusion row for label {0} has zero mass over the prediction set")]
    DegenerateRow(usize),

    #[error("success profile must be nonincreasing in set size with entries in [0, 1]")]
    InvalidProfile,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in structured JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing_column",
            Error::ScoreOutOfRange { .. } => "score_out_of_range",
            Error::DuplicateInstance(_) => "duplicate_instance",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::TrueLabelConflict(_) => "true_label_conflict",
            Error::OrphanPrediction(_) => "orphan_prediction",
            Error::MissingTrueLabel(_) => "missing_true_label",
            Error::InvalidSetRecord { .. } => "invalid_set_record",
            Error::EmptyDataset => "empty_dataset",
            Error::LambdaOutOfRange(..) => "lambda_out_of_range",
            Error::EmptyGrid => "empty_grid",
            Error::AlphaTooSmall { .. } => "alpha_too_small",
            Error::Infeasible => "infeasible",
            Error::AlphaSplitInvalid { .. } => "alpha_split_invalid",
            Error::EmptyStratum(_) => "empty_stratum",
            Error::DegenerateRow(_) => "degenerate_row",
            Error::InvalidProfile => "invalid_profile",
            Error::ConfigInvalid(_) => "config_invalid",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Exit-code contract: 0 ok, 1 config, 2 infeasible, 3 data error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AlphaTooSmall { .. } | Error::Infeasible | Error::AlphaSplitInvalid { .. } => 2,
            Error::MissingColumn(_)
            | Error::ScoreOutOfRange { .. }
            | Error::DuplicateInstance(_)
            | Error::UnknownLabel { .. }
            | Error::TrueLabelConflict(_)
            | Error::OrphanPrediction(_)
            | Error::MissingTrueLabel(_)
            | Error::InvalidSetRecord { .. }
            | Error::EmptyDataset
            | Error::Io(_)
            | Error::Csv(_) => 3,
            _ => 1,
        }
    }
}

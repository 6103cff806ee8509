//! Benchmark harness: data preparation, per-filter fitting, filtering of the
//! test segment and NMSE reports.

mod config;
mod fitted;
mod harness;
mod ingest;
mod metric;
mod report;
mod surrogate;
mod trace;

pub use config::{parse_settings, BenchmarkConfig, DatasetSource, FilterKind, ReportFormat, Settings, WindowMode};
pub use fitted::{FittedFilter, ObservationModel, MODEL_FILE_VERSION};
pub use harness::{prepare_datasets, run_benchmark, run_cell, CellOutcome, MetricReport, TrialResult};
pub use ingest::{ingest_csv, ingest_reader, CsvSchema, Split};
pub use metric::normalized_mse;
pub use report::{parse_report_csv, ReportTable};
pub use surrogate::{generate_surrogate, SURROGATE_OBSERVATION_DIM};
pub use trace::write_trace;

use thiserror::Error;

use crate::filters::FilterError;
use crate::regression::RegressionError;
use crate::statespace::StateSpaceError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("truth has zero variance")]
    ZeroVariance,
    #[error("length mismatch: {predicted} predictions for {truth} truth rows")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("schema mismatch{}: expected {expected} columns, found {found}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    SchemaMismatch { row: Option<usize>, expected: usize, found: usize },
    #[error("non-finite value at row {0}")]
    NonFinite(usize),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("{rows} rows leave nothing to pair at lag {lag}")]
    EmptyAfterLag { rows: usize, lag: usize },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    StateSpace(#[from] StateSpaceError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidConfig(_) => "invalid_config",
            Self::ZeroVariance => "zero_variance",
            Self::LengthMismatch { .. } => "length_mismatch",
            Self::SchemaMismatch { .. } => "schema_mismatch",
            Self::NonFinite(_) => "non_finite",
            Self::Parse { .. } => "parse",
            Self::EmptyAfterLag { .. } => "empty_after_lag",
            Self::ModelFormat(_) => "model_format",
            Self::StateSpace(_) => "state_space",
            Self::Regression(_) => "regression",
            Self::Filter(_) => "filter",
            Self::Io(_) => "io",
            Self::Csv(_) => "csv",
            Self::Json(_) => "json",
        }
    }
}

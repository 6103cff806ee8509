//! Stationary linear-Gaussian state spaces: beliefs, dynamics, datasets and
//! the synthetic benchmark generators.

mod belief;
mod dataset;
mod dynamics;
mod synthetic;

pub use belief::GaussianBelief;
pub use dataset::{sidecar_path, DatasetMetadata, TrajectoryDataset};
pub(crate) use dataset::format_f64;
pub use dynamics::{fit_dynamics, solve_stationary_covariance, LinearGaussianDynamics};
pub use synthetic::{
    generate_synthetic1, generate_synthetic2, sign, synthetic1_observation, synthetic2_observation,
    SYNTHETIC_STATE_GAIN,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StateSpaceError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(&'static str),
    #[error("matrix is not positive definite: {what} (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: &'static str, min_eigenvalue: f64 },
    #[error("dynamics are not stationary: spectral radius {spectral_radius}")]
    NonStationary { spectral_radius: f64 },
    #[error("predecessor states do not span the state space")]
    RankDeficient,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("stationary covariance residual {residual:e} exceeds tolerance")]
    LyapunovResidual { residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

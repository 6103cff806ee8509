//! Learners for the discriminative observation model `z | x ~ N(f(x), Q(x))`
//! and for the generative baselines.
//!
//! * [`gp_fit`]: one GP per state dimension, hyperparameters by multi-start
//!   gradient ascent of the log marginal likelihood.
//! * [`mlp_fit`]: one hidden `tanh` layer, full-batch Adam with weight decay
//!   and early stopping.
//! * [`fit_residual_q`]: constant `Q` from held-out residuals.
//! * [`build_dkf_variant`]: the DKF-GP, DKF-GP-freq and DKF-NN models.

mod gp;
mod kernel;
mod mlp;
mod models;
mod standardize;

pub use gp::{gp_fit, log_marginal_likelihood, GpHyperparameters, GpOptions, GpRegressor};
pub(crate) use gp::GpRegressorDto;
pub use kernel::RbfKernel;
pub use mlp::{mlp_fit, MlpFit, MlpOptions, MlpPartition, MlpRegressor};
pub use models::{
    build_dkf_variant, fit_linear_observation, fit_mlp_observation, fit_residual_q, DkfVariant,
    LearnedDiscriminative, LearnerOptions, MeanModel, MlpObservation, QEstimate, HOLDOUT_FRACTION,
};
pub use standardize::Standardizer;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid model data: {0}")]
    Format(String),
}

//! Closed-form filter steps.
//!
//! All steps share the linear-Gaussian predict `M = A Σ Aᵀ + Γ`; they differ
//! in how the observation enters:
//!
//! * [`kalman_step`]: affine generative model `x = H z + c + v`.
//! * [`ekf_step`]: nonlinear `h`, linearized at the predicted mean.
//! * [`ukf_step`]: nonlinear `h`, propagated through sigma points.
//! * [`dkf_step`]: discriminative model `z | x ~ N(f(x), Q(x))`, combined
//!   exactly as `Σ' = (Q⁻¹ + M⁻¹ − S⁻¹)⁻¹`, `μ' = Σ'(Q⁻¹ f + M⁻¹ A μ)`.

mod dkf;
mod io;
mod kalman;
mod models;
mod regularize;
mod run;
mod ukf;

pub use dkf::{dkf_step, dkf_steady_state_covariance, dkf_update, DkfUpdate, PosteriorPolicy, STEADY_STATE_MAX_ITERATIONS};
pub use io::{read_beliefs_csv, write_beliefs_csv};
pub use kalman::{ekf_step, kalman_step, EkfOptions};
pub use models::{
    DiscriminativeModel, FnDiscriminative, FnGenerative, GenerativeModel, LinearDiscriminative,
    LinearObservation,
};
pub use regularize::{regularize_q, regularize_q_checked, Q_CLIP_EPSILON};
pub use run::{filter_sequence, run_filter, FilterModels, FilterRun, FilterWarnings};
pub use ukf::{ukf_step, UkfParameters};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("innovation covariance is singular at working precision")]
    SingularInnovation,
    #[error("no Jacobian available: model has none and finite differences are disabled")]
    JacobianUnavailable,
    #[error("Kalman step requires an affine observation model")]
    NotAffine,
    #[error("Cholesky factorization failed for {0}")]
    CholeskyFailure(&'static str),
    #[error("posterior covariance is not positive definite (eigenvalues {eigenvalues:?})")]
    InvalidPosterior { eigenvalues: Vec<f64> },
    #[error("steady-state iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid UKF parameters: {0}")]
    InvalidParameters(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<FilterError>,
    },
    #[error("belief csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("belief csv: {0}")]
    Parse(String),
}

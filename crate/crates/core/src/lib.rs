//! Discriminative Kalman filtering.
//!
//! The discriminative Kalman filter (DKF) pairs stationary linear-Gaussian
//! state dynamics with a learned Gaussian model of the *state given the
//! observation*, `p(z | x) = N(f(x), Q(x))`, and propagates the filtering
//! posterior in closed form. This crate provides:
//!
//! * [`statespace`]: Gaussian beliefs, stationary dynamics (Lyapunov solve and
//!   least-squares fitting), trajectory datasets and two synthetic generators.
//! * [`filters`]: Kalman, extended Kalman, unscented Kalman and DKF steps, the
//!   DKF steady-state covariance, and the `S - Q` regularizer.
//! * [`regression`]: per-dimension GP regression, a one-hidden-layer tanh
//!   network, residual covariance estimators and the three DKF variants.
//! * [`oracle`]: brute-force grid filtering for one-dimensional states.
//! * [`bench`]: the normalized-MSE harness, CSV ingestion and reporting.

pub mod bench;
pub mod filters;
pub mod linalg;
pub mod oracle;
pub mod regression;
pub mod rng;
pub mod statespace;

pub use filters::{
    dkf_step, dkf_steady_state_covariance, ekf_step, kalman_step, regularize_q, run_filter,
    ukf_step, DiscriminativeModel, FilterError, GenerativeModel,
};
pub use rng::RandomSource;
pub use statespace::{
    fit_dynamics, solve_stationary_covariance, GaussianBelief, LinearGaussianDynamics,
    StateSpaceError, TrajectoryDataset,
};

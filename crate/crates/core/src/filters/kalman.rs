use nalgebra::{DMatrix, DVector};

use super::{FilterError, GenerativeModel};
use crate::linalg;
use crate::statespace::{GaussianBelief, LinearGaussianDynamics};

/// Options for [`ekf_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfOptions {
    /// Use central differences with step `1e-5·(1 + |z_i|)` when the model
    /// has no analytic Jacobian.
    pub finite_difference_fallback: bool,
}

impl Default for EkfOptions {
    fn default() -> Self {
        Self { finite_difference_fallback: true }
    }
}

pub(crate) fn check_dims(
    belief: &GaussianBelief,
    x: &DVector<f64>,
    dynamics: &LinearGaussianDynamics,
    state_dim: usize,
    observation_dim: usize,
) -> Result<(), FilterError> {
    let d = dynamics.dim();
    if belief.dim() != d || state_dim != d || x.len() != observation_dim {
        return Err(FilterError::DimensionMismatch(format!(
            "belief d={}, dynamics d={d}, model d={state_dim}, x has {} entries, model expects m={observation_dim}",
            belief.dim(),
            x.len()
        )));
    }
    Ok(())
}

/// `(A μ, A Σ Aᵀ + Γ)`.
pub(crate) fn predict(belief: &GaussianBelief, dynamics: &LinearGaussianDynamics) -> (DVector<f64>, DMatrix<f64>) {
    (
        dynamics.transition() * belief.mean(),
        dynamics.predict_covariance(belief.covariance()),
    )
}

/// Returns a belief after confirming its covariance is positive definite.
pub(crate) fn finish(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<GaussianBelief, FilterError> {
    let covariance = linalg::symmetrize(&covariance);
    if linalg::cholesky(&covariance).is_none() {
        return Err(FilterError::InvalidPosterior {
            eigenvalues: linalg::symmetric_eigenvalues(&covariance).iter().copied().collect(),
        });
    }
    Ok(GaussianBelief::from_parts(mean, covariance))
}

/// Kalman update of `(m, M)` with observation matrix `H`, residual
/// `r = x − x̂` and noise `Λ`.
fn linear_update(
    predicted_mean: DVector<f64>,
    predicted_cov: &DMatrix<f64>,
    h: &DMatrix<f64>,
    residual: &DVector<f64>,
    noise: &DMatrix<f64>,
) -> Result<GaussianBelief, FilterError> {
    let hm = h * predicted_cov;
    let innovation = linalg::symmetrize(&(&hm * h.transpose() + noise));
    let chol = linalg::cholesky(&innovation).ok_or(FilterError::SingularInnovation)?;
    // Kᵀ = (H M Hᵀ + Λ)⁻¹ H M
    let gain = chol.solve(&hm).transpose();
    let mean = predicted_mean + &gain * residual;
    let d = predicted_cov.nrows();
    let covariance = (DMatrix::identity(d, d) - &gain * h) * predicted_cov;
    finish(mean, covariance)
}

/// Standard Kalman predict/update for an affine observation model.
pub fn kalman_step(
    belief: &GaussianBelief,
    x: &DVector<f64>,
    dynamics: &LinearGaussianDynamics,
    observation: &dyn GenerativeModel,
) -> Result<GaussianBelief, FilterError> {
    check_dims(belief, x, dynamics, observation.state_dim(), observation.observation_dim())?;
    let (h, offset) = observation.as_affine().ok_or(FilterError::NotAffine)?;
    let (pred_mean, pred_cov) = predict(belief, dynamics);
    let residual = x - (h * &pred_mean + offset);
    linear_update(pred_mean, &pred_cov, h, &residual, observation.noise_covariance())
}

/// Extended Kalman step: `h` is linearized at the predicted mean `A μ`.
pub fn ekf_step(
    belief: &GaussianBelief,
    x: &DVector<f64>,
    dynamics: &LinearGaussianDynamics,
    observation: &dyn GenerativeModel,
    options: &EkfOptions,
) -> Result<GaussianBelief, FilterError> {
    check_dims(belief, x, dynamics, observation.state_dim(), observation.observation_dim())?;
    let (pred_mean, pred_cov) = predict(belief, dynamics);
    let h = match observation.jacobian(&pred_mean) {
        Some(j) => j,
        None if options.finite_difference_fallback => finite_difference_jacobian(observation, &pred_mean),
        None => return Err(FilterError::JacobianUnavailable),
    };
    let residual = x - observation.predict(&pred_mean);
    linear_update(pred_mean, &pred_cov, &h, &residual, observation.noise_covariance())
}

pub(crate) fn finite_difference_jacobian(model: &dyn GenerativeModel, z: &DVector<f64>) -> DMatrix<f64> {
    let d = z.len();
    let m = model.observation_dim();
    let mut jac = DMatrix::zeros(m, d);
    for i in 0..d {
        let step = 1e-5 * (1.0 + z[i].abs());
        let mut plus = z.clone();
        plus[i] += step;
        let mut minus = z.clone();
        minus[i] -= step;
        let col = (model.predict(&plus) - model.predict(&minus)) / (2.0 * step);
        jac.set_column(i, &col);
    }
    jac
}

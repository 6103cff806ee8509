use nalgebra::{DMatrix, DVector};

use super::kalman::{check_dims, finish, predict};
use super::{FilterError, GenerativeModel};
use crate::linalg;
use crate::statespace::{GaussianBelief, LinearGaussianDynamics};

/// Scaled unscented transform parameters, `λ = α²(d + κ) − d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfParameters {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl UkfParameters {
    /// `α = 1`, `β = 2`, `κ = 3 − d`.
    pub fn default_for(state_dim: usize) -> Self {
        Self { alpha: 1.0, beta: 2.0, kappa: 3.0 - state_dim as f64 }
    }

    pub fn lambda(&self, state_dim: usize) -> f64 {
        let d = state_dim as f64;
        self.alpha * self.alpha * (d + self.kappa) - d
    }

    pub fn validate(&self, state_dim: usize) -> Result<(), FilterError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(FilterError::InvalidParameters(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        let spread = state_dim as f64 + self.lambda(state_dim);
        if !(spread > 0.0) {
            return Err(FilterError::InvalidParameters(format!("d + lambda = {spread} must be positive")));
        }
        Ok(())
    }

    /// Mean and covariance weights for the `2d + 1` sigma points.
    fn weights(&self, state_dim: usize) -> (Vec<f64>, Vec<f64>) {
        let lambda = self.lambda(state_dim);
        let spread = state_dim as f64 + lambda;
        let w = 0.5 / spread;
        let mut wm = vec![w; 2 * state_dim + 1];
        let mut wc = wm.clone();
        wm[0] = lambda / spread;
        wc[0] = wm[0] + (1.0 - self.alpha * self.alpha + self.beta);
        (wm, wc)
    }
}

/// Unscented Kalman step. Sigma points are drawn from the predicted
/// `(A μ, M)` and pushed through `h`; the update uses the gain
/// `K = P_zx P_xx⁻¹`.
pub fn ukf_step(
    belief: &GaussianBelief,
    x: &DVector<f64>,
    dynamics: &LinearGaussianDynamics,
    observation: &dyn GenerativeModel,
    params: &UkfParameters,
) -> Result<GaussianBelief, FilterError> {
    check_dims(belief, x, dynamics, observation.state_dim(), observation.observation_dim())?;
    let d = dynamics.dim();
    params.validate(d)?;
    let (pred_mean, pred_cov) = predict(belief, dynamics);
    let spread = d as f64 + params.lambda(d);
    let root = linalg::cholesky(&(&pred_cov * spread))
        .ok_or(FilterError::CholeskyFailure("predicted covariance"))?
        .l();

    let mut points = Vec::with_capacity(2 * d + 1);
    points.push(pred_mean.clone());
    for i in 0..d {
        points.push(&pred_mean + root.column(i));
    }
    for i in 0..d {
        points.push(&pred_mean - root.column(i));
    }
    let (wm, wc) = params.weights(d);

    let images: Vec<DVector<f64>> = points.iter().map(|p| observation.predict(p)).collect();
    let m = observation.observation_dim();
    let mut x_mean = DVector::zeros(m);
    for (w, y) in wm.iter().zip(&images) {
        x_mean.axpy(*w, y, 1.0);
    }
    let mut p_xx = observation.noise_covariance().clone();
    let mut p_zx = DMatrix::zeros(d, m);
    for ((w, y), p) in wc.iter().zip(&images).zip(&points) {
        let dy = y - &x_mean;
        let dz = p - &pred_mean;
        p_xx.ger(*w, &dy, &dy, 1.0);
        p_zx.ger(*w, &dz, &dy, 1.0);
    }
    let p_xx = linalg::symmetrize(&p_xx);
    let chol = linalg::cholesky(&p_xx).ok_or(FilterError::SingularInnovation)?;
    // Kᵀ = P_xx⁻¹ P_zxᵀ
    let gain = chol.solve(&p_zx.transpose()).transpose();
    let mean = &pred_mean + &gain * (x - &x_mean);
    let covariance = &pred_cov - &gain * &p_xx * gain.transpose();
    finish(mean, covariance)
}

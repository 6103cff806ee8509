use nalgebra::{DMatrix, DVector};

use super::{LinearGaussianDynamics, StateSpaceError};
use crate::linalg;

/// Gaussian posterior over the latent state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianBelief {
    /// Validates that `covariance` is `d×d`, symmetric to 1e-12 relative
    /// tolerance and positive definite.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, StateSpaceError> {
        let d = mean.len();
        if d == 0 || covariance.shape() != (d, d) {
            return Err(StateSpaceError::DimensionMismatch(format!(
                "mean has length {d}, covariance is {:?}",
                covariance.shape()
            )));
        }
        if !linalg::is_symmetric(&covariance, 1e-12) {
            return Err(StateSpaceError::NotSymmetric("belief covariance"));
        }
        if linalg::cholesky(&covariance).is_none() {
            return Err(StateSpaceError::NotPositiveDefinite {
                what: "belief covariance",
                min_eigenvalue: linalg::min_eigenvalue(&covariance),
            });
        }
        Ok(Self { mean, covariance })
    }

    /// Skips validation. Filter steps use this after symmetrizing and
    /// factoring the covariance themselves.
    pub(crate) fn from_parts(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self { mean, covariance }
    }

    /// The filter's initial belief `(0, S)`.
    pub fn stationary_prior(dynamics: &LinearGaussianDynamics) -> Self {
        let d = dynamics.dim();
        Self {
            mean: DVector::zeros(d),
            covariance: dynamics.stationary_covariance().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.covariance)
    }
}

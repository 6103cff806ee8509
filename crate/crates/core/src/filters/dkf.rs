use nalgebra::{DMatrix, DVector};

use super::kalman::{check_dims, predict};
use super::regularize::regularize_q_checked;
use super::{DiscriminativeModel, FilterError};
use crate::linalg;
use crate::statespace::{GaussianBelief, LinearGaussianDynamics};

/// Iteration cap for [`dkf_steady_state_covariance`].
pub const STEADY_STATE_MAX_ITERATIONS: usize = 10_000;

/// What to do when `Q⁻¹ + M⁻¹ − S⁻¹` is not positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorPolicy {
    /// Fail with [`FilterError::InvalidPosterior`].
    Strict,
    /// Drop the `−S⁻¹` prior correction for this step.
    DropPriorCorrection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DkfUpdate {
    pub belief: GaussianBelief,
    /// `Q(x)` violated `0 ≺ Q ⪯ S` and was clipped.
    pub q_regularized: bool,
    /// The posterior fell back to `(Q⁻¹ + M⁻¹)⁻¹`.
    pub prior_correction_dropped: bool,
}

struct Factored {
    s_inv: DMatrix<f64>,
}

impl Factored {
    fn new(dynamics: &LinearGaussianDynamics) -> Result<Self, FilterError> {
        let s_inv = linalg::spd_inverse(dynamics.stationary_covariance())
            .ok_or(FilterError::CholeskyFailure("stationary covariance"))?;
        Ok(Self { s_inv })
    }
}

/// Information form `(Q⁻¹ + M⁻¹ − S⁻¹, Q⁻¹ f + M⁻¹ A μ)`, solved for the
/// posterior with Cholesky factorizations of `Q`, `M` and the result.
fn combine(
    f: Option<&DVector<f64>>,
    q: &DMatrix<f64>,
    pred_mean: Option<&DVector<f64>>,
    pred_cov: &DMatrix<f64>,
    factored: &Factored,
    policy: PosteriorPolicy,
) -> Result<(DMatrix<f64>, Option<DVector<f64>>, bool), FilterError> {
    let chol_q = linalg::cholesky(q).ok_or(FilterError::CholeskyFailure("Q(x)"))?;
    let chol_m = linalg::cholesky(pred_cov).ok_or(FilterError::CholeskyFailure("predicted covariance"))?;
    let q_inv = chol_q.inverse();
    let m_inv = chol_m.inverse();
    let information = linalg::symmetrize(&(&q_inv + &m_inv - &factored.s_inv));

    let (chol_post, dropped) = match linalg::cholesky(&information) {
        Some(c) => (c, false),
        None => match policy {
            PosteriorPolicy::Strict => {
                return Err(FilterError::InvalidPosterior {
                    eigenvalues: linalg::symmetric_eigenvalues(&information).iter().map(|v| 1.0 / v).collect(),
                })
            }
            PosteriorPolicy::DropPriorCorrection => {
                let fallback = linalg::symmetrize(&(&q_inv + &m_inv));
                (linalg::cholesky(&fallback).ok_or(FilterError::CholeskyFailure("fallback information"))?, true)
            }
        },
    };
    let covariance = linalg::symmetrize(&chol_post.inverse());
    let mean = match (f, pred_mean) {
        (Some(f), Some(pm)) => Some(&covariance * (chol_q.solve(f) + chol_m.solve(pm))),
        _ => None,
    };
    Ok((covariance, mean, dropped))
}

/// DKF update from already-evaluated `f(x)` and `Q(x)`.
pub fn dkf_update(
    belief: &GaussianBelief,
    f: &DVector<f64>,
    q: &DMatrix<f64>,
    dynamics: &LinearGaussianDynamics,
    policy: PosteriorPolicy,
) -> Result<DkfUpdate, FilterError> {
    let d = dynamics.dim();
    if belief.dim() != d || f.len() != d || q.shape() != (d, d) {
        return Err(FilterError::DimensionMismatch(format!(
            "belief d={}, dynamics d={d}, f has {} entries, Q is {:?}",
            belief.dim(),
            f.len(),
            q.shape()
        )));
    }
    let factored = Factored::new(dynamics)?;
    let (q, q_regularized) = regularize_q_checked(q, dynamics.stationary_covariance());
    let (pred_mean, pred_cov) = predict(belief, dynamics);
    let (covariance, mean, dropped) = combine(Some(f), &q, Some(&pred_mean), &pred_cov, &factored, policy)?;
    let mean = mean.expect("mean requested");
    if linalg::cholesky(&covariance).is_none() {
        return Err(FilterError::InvalidPosterior {
            eigenvalues: linalg::symmetric_eigenvalues(&covariance).iter().copied().collect(),
        });
    }
    Ok(DkfUpdate {
        belief: GaussianBelief::from_parts(mean, covariance),
        q_regularized,
        prior_correction_dropped: dropped,
    })
}

/// One exact DKF step:
/// `M = A Σ Aᵀ + Γ`, `Σ' = (Q(x)⁻¹ + M⁻¹ − S⁻¹)⁻¹`, `μ' = Σ'(Q(x)⁻¹ f(x) + M⁻¹ A μ)`.
///
/// `Q(x)` is passed through [`super::regularize_q`] first.
pub fn dkf_step(
    belief: &GaussianBelief,
    x: &DVector<f64>,
    dynamics: &LinearGaussianDynamics,
    observation: &dyn DiscriminativeModel,
) -> Result<GaussianBelief, FilterError> {
    check_dims(belief, x, dynamics, observation.state_dim(), observation.observation_dim())?;
    let f = observation.mean(x);
    let q = observation.covariance(x);
    dkf_update(belief, &f, &q, dynamics, PosteriorPolicy::Strict).map(|u| u.belief)
}

/// Fixed point of `Σ = (Q⁻¹ + (A Σ Aᵀ + Γ)⁻¹ − S⁻¹)⁻¹` for constant `Q`,
/// iterated from `Σ₀ = S` until successive iterates differ by less than
/// 1e-12 relative (Frobenius).
pub fn dkf_steady_state_covariance(
    dynamics: &LinearGaussianDynamics,
    q: &DMatrix<f64>,
) -> Result<DMatrix<f64>, FilterError> {
    let d = dynamics.dim();
    if q.shape() != (d, d) {
        return Err(FilterError::DimensionMismatch(format!("Q is {:?}, expected {d}x{d}", q.shape())));
    }
    let factored = Factored::new(dynamics)?;
    let (q, _) = regularize_q_checked(q, dynamics.stationary_covariance());
    let step = |sigma: &DMatrix<f64>| -> Result<DMatrix<f64>, FilterError> {
        let m = dynamics.predict_covariance(sigma);
        combine(None, &q, None, &m, &factored, PosteriorPolicy::Strict).map(|(c, _, _)| c)
    };

    let mut sigma = dynamics.stationary_covariance().clone();
    for _ in 0..STEADY_STATE_MAX_ITERATIONS {
        let next = step(&sigma)?;
        let delta = (&next - &sigma).norm();
        sigma = next;
        if delta < 1e-12 * sigma.norm() {
            let residual = (&sigma - step(&sigma)?).norm();
            if residual <= 1e-10 * sigma.norm() {
                return Ok(sigma);
            }
        }
    }
    Err(FilterError::NoConvergence { iterations: STEADY_STATE_MAX_ITERATIONS })
}

use nalgebra::{DMatrix, DVector};

use super::StateSpaceError;
use crate::linalg;

/// Stationarity margin on the spectral radius of `A`.
const STATIONARY_MARGIN: f64 = 1e-9;

/// `z_t = A z_{t-1} + w_t`, `w_t ~ N(0, Γ)`, with stationary covariance `S`
/// solving `S = A S Aᵀ + Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianDynamics {
    transition: DMatrix<f64>,
    process_noise: DMatrix<f64>,
    stationary_covariance: DMatrix<f64>,
}

impl LinearGaussianDynamics {
    /// Builds the dynamics and solves for the stationary covariance.
    pub fn new(transition: DMatrix<f64>, process_noise: DMatrix<f64>) -> Result<Self, StateSpaceError> {
        let s = solve_stationary_covariance(&transition, &process_noise)?;
        Ok(Self {
            transition,
            process_noise: linalg::symmetrize(&process_noise),
            stationary_covariance: s,
        })
    }

    /// Accepts a caller-supplied `S` after checking every invariant, including
    /// `‖S − A S Aᵀ − Γ‖_F ≤ 1e-8 ‖S‖_F`.
    pub fn with_stationary_covariance(
        transition: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        stationary_covariance: DMatrix<f64>,
    ) -> Result<Self, StateSpaceError> {
        check_square(&transition, &process_noise)?;
        if stationary_covariance.shape() != transition.shape() {
            return Err(StateSpaceError::DimensionMismatch("S must match A".into()));
        }
        check_spd(&process_noise, "process noise")?;
        check_spd(&stationary_covariance, "stationary covariance")?;
        check_stationary(&transition)?;
        let residual = lyapunov_residual(&transition, &process_noise, &stationary_covariance);
        if residual > 1e-8 * stationary_covariance.norm() {
            return Err(StateSpaceError::LyapunovResidual { residual });
        }
        Ok(Self { transition, process_noise, stationary_covariance })
    }

    /// No invariant checks. For the generative baselines, which never touch
    /// `S`, and for tests of non-stationary predict steps.
    pub fn new_unchecked(
        transition: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        stationary_covariance: DMatrix<f64>,
    ) -> Self {
        Self { transition, process_noise, stationary_covariance }
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }

    /// `A`.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// `Γ`.
    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    /// `S`.
    pub fn stationary_covariance(&self) -> &DMatrix<f64> {
        &self.stationary_covariance
    }

    /// One-step predicted covariance `A Σ Aᵀ + Γ`.
    pub fn predict_covariance(&self, covariance: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.transition * covariance * self.transition.transpose() + &self.process_noise))
    }
}

fn check_square(a: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Result<(), StateSpaceError> {
    if !a.is_square() || a.nrows() == 0 || gamma.shape() != a.shape() {
        return Err(StateSpaceError::DimensionMismatch(format!(
            "A is {:?}, Gamma is {:?}",
            a.shape(),
            gamma.shape()
        )));
    }
    Ok(())
}

fn check_spd(m: &DMatrix<f64>, what: &'static str) -> Result<(), StateSpaceError> {
    if !linalg::is_symmetric(m, 1e-12) {
        return Err(StateSpaceError::NotSymmetric(what));
    }
    if linalg::cholesky(m).is_none() {
        return Err(StateSpaceError::NotPositiveDefinite {
            what,
            min_eigenvalue: linalg::min_eigenvalue(m),
        });
    }
    Ok(())
}

fn check_stationary(a: &DMatrix<f64>) -> Result<f64, StateSpaceError> {
    let rho = linalg::spectral_radius(a);
    if !(rho < 1.0 - STATIONARY_MARGIN) {
        return Err(StateSpaceError::NonStationary { spectral_radius: rho });
    }
    Ok(rho)
}

fn lyapunov_residual(a: &DMatrix<f64>, gamma: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    (s - a * s * a.transpose() - gamma).norm()
}

/// Solves the discrete Lyapunov equation `S = A S Aᵀ + Γ`.
///
/// The equation is vectorized as `(I − A⊗A) vec(S) = vec(Γ)` and solved by LU,
/// followed by iterative refinement until the relative Frobenius residual is
/// at most 1e-10.
pub fn solve_stationary_covariance(
    a: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
) -> Result<DMatrix<f64>, StateSpaceError> {
    check_square(a, gamma)?;
    check_spd(gamma, "process noise")?;
    check_stationary(a)?;

    let d = a.nrows();
    let system = DMatrix::identity(d * d, d * d) - a.kronecker(a);
    let lu = system.lu();
    let solve = |rhs: &DMatrix<f64>| -> Result<DMatrix<f64>, StateSpaceError> {
        let v = DVector::from_column_slice(rhs.as_slice());
        let x = lu
            .solve(&v)
            .ok_or(StateSpaceError::NonStationary { spectral_radius: linalg::spectral_radius(a) })?;
        Ok(DMatrix::from_column_slice(d, d, x.as_slice()))
    };

    let mut s = linalg::symmetrize(&solve(gamma)?);
    for _ in 0..4 {
        let residual = gamma + a * &s * a.transpose() - &s;
        if residual.norm() <= 1e-13 * s.norm() {
            break;
        }
        s = linalg::symmetrize(&(&s + solve(&residual)?));
    }

    let residual = lyapunov_residual(a, gamma, &s);
    if residual > 1e-10 * s.norm() {
        return Err(StateSpaceError::LyapunovResidual { residual });
    }
    check_spd(&s, "stationary covariance")?;
    Ok(s)
}

/// Least-squares fit of `A` from `(z_prev, z_next)` pairs (no intercept),
/// `Γ` as the residual covariance with denominator `n` plus a small SPD floor,
/// and `S` from the Lyapunov solve.
pub fn fit_dynamics<'a>(
    pairs: impl IntoIterator<Item = (&'a DVector<f64>, &'a DVector<f64>)> + Clone,
) -> Result<LinearGaussianDynamics, StateSpaceError> {
    let d = match pairs.clone().into_iter().next() {
        Some((prev, _)) => prev.len(),
        None => return Err(StateSpaceError::InsufficientData { needed: 1, got: 0 }),
    };
    for (prev, next) in pairs.clone() {
        if prev.len() != d || next.len() != d {
            return Err(StateSpaceError::DimensionMismatch("state pairs must share one dimension".into()));
        }
    }
    let fit = linalg::least_squares(pairs.clone(), d, d);
    let a = fit.coefficients.ok_or(StateSpaceError::RankDeficient)?;
    if fit.samples < d + 1 {
        return Err(StateSpaceError::InsufficientData { needed: d + 1, got: fit.samples });
    }
    let residuals: Vec<DVector<f64>> = pairs.into_iter().map(|(prev, next)| next - &a * prev).collect();
    let (gamma, _) = linalg::residual_covariance(d, &residuals);
    LinearGaussianDynamics::new(a, linalg::floor_covariance(&gamma))
}

/// Consecutive `(z_{t-1}, z_t)` pairs of a state sequence.
pub(crate) fn consecutive_pairs(
    states: &[DVector<f64>],
) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>)> + Clone {
    states.windows(2).map(|w| (&w[0], &w[1]))
}

impl LinearGaussianDynamics {
    /// [`fit_dynamics`] over consecutive states of one trajectory.
    pub fn fit_trajectory(states: &[DVector<f64>]) -> Result<Self, StateSpaceError> {
        fit_dynamics(consecutive_pairs(states))
    }
}

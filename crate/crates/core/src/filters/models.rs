use nalgebra::{DMatrix, DVector};

use super::FilterError;
use crate::linalg;
use crate::statespace::LinearGaussianDynamics;

/// `p(z | x) = N(f(x), Q(x))`.
///
/// Implementations must be callable concurrently; learned models are
/// immutable after fitting.
pub trait DiscriminativeModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn observation_dim(&self) -> usize;
    /// `f(x)`.
    fn mean(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `Q(x)`, symmetric. Positive definiteness and `S − Q ⪰ 0` are enforced
    /// by the filter through [`super::regularize_q`].
    fn covariance(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// `p(x | z) = N(h(z), Λ)`.
pub trait GenerativeModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn observation_dim(&self) -> usize;
    /// `h(z)`.
    fn predict(&self, z: &DVector<f64>) -> DVector<f64>;
    /// `Λ`.
    fn noise_covariance(&self) -> &DMatrix<f64>;
    /// Analytic `∂h/∂z`, when the model has one.
    fn jacobian(&self, _z: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
    /// `(H, c)` when `h(z) = H z + c`.
    fn as_affine(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        None
    }
}

/// Affine observation model `x = H z + c + v`, `v ~ N(0, Λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObservation {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
    noise: DMatrix<f64>,
}

impl LinearObservation {
    pub fn new(matrix: DMatrix<f64>, noise: DMatrix<f64>) -> Result<Self, FilterError> {
        let m = matrix.nrows();
        Self::with_offset(matrix, DVector::zeros(m), noise)
    }

    pub fn with_offset(matrix: DMatrix<f64>, offset: DVector<f64>, noise: DMatrix<f64>) -> Result<Self, FilterError> {
        let m = matrix.nrows();
        if offset.len() != m || noise.shape() != (m, m) {
            return Err(FilterError::DimensionMismatch(format!(
                "H is {:?}, offset {}, noise {:?}",
                matrix.shape(),
                offset.len(),
                noise.shape()
            )));
        }
        if !linalg::is_positive_definite(&noise) {
            return Err(FilterError::CholeskyFailure("observation noise"));
        }
        Ok(Self { matrix, offset, noise })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }
}

impl GenerativeModel for LinearObservation {
    fn state_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn observation_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn predict(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.matrix * z + &self.offset
    }

    fn noise_covariance(&self) -> &DMatrix<f64> {
        &self.noise
    }

    fn jacobian(&self, _z: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.matrix.clone())
    }

    fn as_affine(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        Some((&self.matrix, &self.offset))
    }
}

/// Affine discriminative model `f(x) = G (x − c)`, constant `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDiscriminative {
    gain: DMatrix<f64>,
    offset: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl LinearDiscriminative {
    pub fn new(gain: DMatrix<f64>, offset: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self { gain, offset, covariance }
    }

    /// The exact conditional of `z` given `x` when `z ~ N(0, S)` and
    /// `x = H z + c + v`: `G = S Hᵀ (H S Hᵀ + Λ)⁻¹`, `Q = S − G H S`.
    /// Feeding this model to the DKF reproduces the Kalman filter.
    pub fn conjugate(dynamics: &LinearGaussianDynamics, observation: &LinearObservation) -> Result<Self, FilterError> {
        let s = dynamics.stationary_covariance();
        let h = observation.matrix();
        let innovation = linalg::symmetrize(&(h * s * h.transpose() + observation.noise_covariance()));
        let chol = linalg::cholesky(&innovation).ok_or(FilterError::SingularInnovation)?;
        // Gᵀ = (H S Hᵀ + Λ)⁻¹ H S
        let gain = chol.solve(&(h * s)).transpose();
        let covariance = linalg::symmetrize(&(s - &gain * h * s));
        Ok(Self { gain, offset: observation.offset().clone(), covariance })
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }
}

impl DiscriminativeModel for LinearDiscriminative {
    fn state_dim(&self) -> usize {
        self.gain.nrows()
    }

    fn observation_dim(&self) -> usize {
        self.gain.ncols()
    }

    fn mean(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gain * (x - &self.offset)
    }

    fn covariance(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.covariance.clone()
    }
}

/// Discriminative model from closures.
pub struct FnDiscriminative<F, Q> {
    state_dim: usize,
    observation_dim: usize,
    mean: F,
    covariance: Q,
}

impl<F, Q> FnDiscriminative<F, Q>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
    Q: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    pub fn new(state_dim: usize, observation_dim: usize, mean: F, covariance: Q) -> Self {
        Self { state_dim, observation_dim, mean, covariance }
    }
}

impl<F, Q> DiscriminativeModel for FnDiscriminative<F, Q>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
    Q: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn observation_dim(&self) -> usize {
        self.observation_dim
    }

    fn mean(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.mean)(x)
    }

    fn covariance(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.covariance)(x)
    }
}

type JacobianFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Generative model from a closure, with an optional analytic Jacobian.
pub struct FnGenerative<H> {
    state_dim: usize,
    predict: H,
    noise: DMatrix<f64>,
    jacobian: Option<JacobianFn>,
}

impl<H> FnGenerative<H>
where
    H: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    pub fn new(state_dim: usize, predict: H, noise: DMatrix<f64>) -> Self {
        Self { state_dim, predict, noise, jacobian: None }
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }
}

impl<H> GenerativeModel for FnGenerative<H>
where
    H: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn observation_dim(&self) -> usize {
        self.noise.nrows()
    }

    fn predict(&self, z: &DVector<f64>) -> DVector<f64> {
        (self.predict)(z)
    }

    fn noise_covariance(&self) -> &DMatrix<f64> {
        &self.noise
    }

    fn jacobian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.jacobian.as_ref().map(|j| j(z))
    }
}

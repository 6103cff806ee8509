//! Brute-force grid filtering for scalar states.
//!
//! Densities live on a uniform grid and integrals use the trapezoid rule.
//! Each step convolves the current density with the Gaussian transition
//! kernel, multiplies by a likelihood (generative) or by the ratio
//! `N(z; f, q) / N(z; 0, S)` (discriminative) in the log domain, and
//! renormalizes.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::filters::GenerativeModel;
use crate::linalg;
use crate::statespace::LinearGaussianDynamics;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unnormalized density has no mass on the grid")]
    DegenerateDensity,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub const DEFAULT_GRID_POINTS: usize = 4000;

/// Uniform grid `lower = z₀ < … < z_{n−1} = upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    lower: f64,
    upper: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self, OracleError> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(OracleError::InvalidGrid(format!("need finite lower < upper, got [{lower}, {upper}]")));
        }
        if points < 16 {
            return Err(OracleError::InvalidGrid(format!("need at least 16 points, got {points}")));
        }
        Ok(Self { lower, upper, points })
    }

    /// `±8√S` around 0 with `points` nodes.
    pub fn for_dynamics(dynamics: &LinearGaussianDynamics, points: usize) -> Result<Self, OracleError> {
        check_scalar(dynamics)?;
        let half = 8.0 * dynamics.stationary_covariance()[(0, 0)].sqrt();
        Self::new(-half, half, points)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.points { self.upper } else { self.lower + i as f64 * self.spacing() }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }
}

/// Nonnegative node values integrating to 1 under the trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GridDensity {
    /// Normalizes `values` (one per node).
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, OracleError> {
        if values.len() != grid.points {
            return Err(OracleError::DimensionMismatch(format!("{} values for {} nodes", values.len(), grid.points)));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OracleError::InvalidArgument("density values must be finite and nonnegative".into()));
        }
        let mass: f64 = grid.weights().iter().zip(&values).map(|(w, v)| w * v).sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(OracleError::DegenerateDensity);
        }
        Ok(Self { grid, values: values.into_iter().map(|v| v / mass).collect() })
    }

    /// Normalizes `exp(log_values)` after shifting by the maximum.
    pub fn from_log(grid: GridSpec, log_values: &[f64]) -> Result<Self, OracleError> {
        let top = log_values.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(OracleError::DegenerateDensity);
        }
        Self::new(grid, log_values.iter().map(|v| if v.is_nan() { 0.0 } else { (v - top).exp() }).collect())
    }

    pub fn gaussian(grid: GridSpec, mean: f64, variance: f64) -> Result<Self, OracleError> {
        if !(variance > 0.0) {
            return Err(OracleError::InvalidArgument(format!("variance {variance} must be positive")));
        }
        let logs: Vec<f64> = grid.nodes().iter().map(|z| log_normal(*z, mean, variance)).collect();
        Self::from_log(grid, &logs)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid integral.
    pub fn mass(&self) -> f64 {
        self.grid.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }
}

/// Trapezoid mean and central second moment.
pub fn grid_moments(density: &GridDensity) -> (f64, f64) {
    let w = density.grid.weights();
    let z = density.grid.nodes();
    let p = &density.values;
    let mean: f64 = (0..z.len()).map(|i| w[i] * z[i] * p[i]).sum();
    let var: f64 = (0..z.len()).map(|i| w[i] * (z[i] - mean).powi(2) * p[i]).sum();
    (mean, var)
}

fn log_normal(z: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * ((z - mean).powi(2) / variance + variance.ln() + LN_2PI)
}

fn check_scalar(dynamics: &LinearGaussianDynamics) -> Result<(), OracleError> {
    if dynamics.dim() != 1 {
        return Err(OracleError::DimensionMismatch(format!("grid oracle needs d = 1, got {}", dynamics.dim())));
    }
    Ok(())
}

/// Grid filter with the transition kernel precomputed:
/// `T[i][j] = N(z_i; a z_j, γ) · w_j`.
#[derive(Debug, Clone)]
pub struct GridFilter {
    grid: GridSpec,
    nodes: Vec<f64>,
    transition: Vec<f64>,
    stationary_variance: f64,
}

impl GridFilter {
    pub fn new(grid: GridSpec, dynamics: &LinearGaussianDynamics) -> Result<Self, OracleError> {
        check_scalar(dynamics)?;
        let a = dynamics.transition()[(0, 0)];
        let gamma = dynamics.process_noise()[(0, 0)];
        if !(gamma > 0.0) {
            return Err(OracleError::InvalidArgument(format!("process noise {gamma} must be positive")));
        }
        let nodes = grid.nodes();
        let w = grid.weights();
        let n = nodes.len();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * gamma).sqrt();
        let mut transition = vec![0.0; n * n];
        for (i, zi) in nodes.iter().enumerate() {
            let row = &mut transition[i * n..(i + 1) * n];
            for (j, zj) in nodes.iter().enumerate() {
                let r = zi - a * zj;
                row[j] = norm * (-0.5 * r * r / gamma).exp() * w[j];
            }
        }
        Ok(Self { grid, nodes, transition, stationary_variance: dynamics.stationary_covariance()[(0, 0)] })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Discretized `N(0, S)`.
    pub fn stationary_prior(&self) -> Result<GridDensity, OracleError> {
        GridDensity::gaussian(self.grid, 0.0, self.stationary_variance)
    }

    /// `∫ p(z | z') p(z') dz'` at every node.
    pub fn predict(&self, prior: &GridDensity) -> Result<Vec<f64>, OracleError> {
        if prior.grid != self.grid {
            return Err(OracleError::InvalidGrid("prior lives on a different grid".into()));
        }
        let n = self.nodes.len();
        Ok((0..n)
            .map(|i| self.transition[i * n..(i + 1) * n].iter().zip(&prior.values).map(|(t, p)| t * p).sum())
            .collect())
    }

    /// Prediction followed by multiplication with `exp(log_weight(z))`.
    pub fn step_log_weight(&self, prior: &GridDensity, log_weight: impl Fn(f64) -> f64) -> Result<GridDensity, OracleError> {
        let predicted = self.predict(prior)?;
        let logs: Vec<f64> = self.nodes.iter().zip(&predicted).map(|(z, p)| p.ln() + log_weight(*z)).collect();
        GridDensity::from_log(self.grid, &logs)
    }

    /// Generative update with `p(x | z) = N(x; h(z), Λ)`.
    pub fn step_generative(&self, prior: &GridDensity, x: &DVector<f64>, observation: &dyn GenerativeModel) -> Result<GridDensity, OracleError> {
        if observation.state_dim() != 1 || x.len() != observation.observation_dim() {
            return Err(OracleError::DimensionMismatch(format!(
                "model d={}, m={}, x has {} entries",
                observation.state_dim(),
                observation.observation_dim(),
                x.len()
            )));
        }
        let noise = observation.noise_covariance();
        let chol = linalg::cholesky(noise).ok_or_else(|| OracleError::InvalidArgument("observation noise is not positive definite".into()))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let m = x.len() as f64;
        self.step_log_weight(prior, |z| {
            let r = x - observation.predict(&DVector::from_element(1, z));
            let quad = r.dot(&chol.solve(&r));
            -0.5 * (quad + log_det + m * LN_2PI)
        })
    }

    /// Discriminative update with the ratio `N(z; f, q) / N(z; 0, S)`.
    pub fn step_discriminative(&self, prior: &GridDensity, f_val: f64, q_val: f64) -> Result<GridDensity, OracleError> {
        if !(q_val > 0.0 && q_val.is_finite()) {
            return Err(OracleError::InvalidArgument(format!("q = {q_val} must be positive")));
        }
        let s = self.stationary_variance;
        self.step_log_weight(prior, |z| log_normal(z, f_val, q_val) - log_normal(z, 0.0, s))
    }
}

/// One generative step; builds the transition kernel for this call.
pub fn grid_step_generative(
    prior: &GridDensity,
    x: &DVector<f64>,
    dynamics: &LinearGaussianDynamics,
    observation: &dyn GenerativeModel,
) -> Result<GridDensity, OracleError> {
    GridFilter::new(prior.grid, dynamics)?.step_generative(prior, x, observation)
}

/// One step with an explicit log-likelihood `ln p(x_t | z)`.
pub fn grid_step_likelihood(
    prior: &GridDensity,
    dynamics: &LinearGaussianDynamics,
    log_likelihood: impl Fn(f64) -> f64,
) -> Result<GridDensity, OracleError> {
    GridFilter::new(prior.grid, dynamics)?.step_log_weight(prior, log_likelihood)
}

/// One discriminative step; builds the transition kernel for this call.
pub fn grid_step_discriminative(
    prior: &GridDensity,
    f_val: f64,
    q_val: f64,
    dynamics: &LinearGaussianDynamics,
) -> Result<GridDensity, OracleError> {
    GridFilter::new(prior.grid, dynamics)?.step_discriminative(prior, f_val, q_val)
}

/// Scalar dynamics helper for oracle configurations.
pub fn scalar_dynamics(a: f64, gamma: f64) -> Result<LinearGaussianDynamics, crate::statespace::StateSpaceError> {
    LinearGaussianDynamics::new(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, gamma))
}

/// Worst gaps between DKF and grid posteriors over one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub transition: f64,
    pub process_noise: f64,
    pub max_mean_gap: f64,
    pub max_variance_gap: f64,
}

/// Draws `configs` scalar models (`a ∈ [−0.95, 0.95]`, `γ ∈ [0.1, 2]`),
/// simulates `steps` observations `x = z + noise` from each and runs the DKF
/// next to the grid filter. The discriminative model is
/// `f(x) = c·tanh(x / c)`, `Q(x) = S·(0.1 + 0.8 / (1 + x²))` with a random
/// scale `c`.
pub fn compare_dkf_with_grid(
    configs: usize,
    steps: usize,
    seed: u64,
    points: usize,
) -> Result<Vec<OracleComparison>, OracleError> {
    use crate::filters::{dkf_step, FnDiscriminative};
    use crate::rng::RandomSource;
    use crate::statespace::GaussianBelief;

    let mut rng = RandomSource::new(seed);
    (0..configs)
        .map(|_| {
            let a = -0.95 + 1.9 * rng.uniform();
            let gamma = 0.1 + 1.9 * rng.uniform();
            let dynamics = scalar_dynamics(a, gamma).map_err(|e| OracleError::InvalidArgument(e.to_string()))?;
            let s = dynamics.stationary_covariance()[(0, 0)];
            let c = s.sqrt() * (1.0 + 2.0 * rng.uniform());
            let obs_sd = s.sqrt() * (0.2 + rng.uniform());
            let mean = move |x: f64| c * (x / c).tanh();
            let q = move |x: f64| s * (0.1 + 0.8 / (1.0 + x * x));
            let model = FnDiscriminative::new(
                1,
                1,
                move |x: &DVector<f64>| x.map(mean),
                move |x: &DVector<f64>| DMatrix::from_element(1, 1, q(x[0])),
            );
            let filter = GridFilter::new(GridSpec::for_dynamics(&dynamics, points)?, &dynamics)?;
            let mut density = filter.stationary_prior()?;
            let mut belief = GaussianBelief::stationary_prior(&dynamics);
            let mut z = s.sqrt() * rng.standard_normal();
            let (mut mean_gap, mut var_gap) = (0.0f64, 0.0f64);
            for _ in 0..steps {
                z = a * z + gamma.sqrt() * rng.standard_normal();
                let x = DVector::from_element(1, z + obs_sd * rng.standard_normal());
                density = filter.step_discriminative(&density, mean(x[0]), q(x[0]))?;
                belief = dkf_step(&belief, &x, &dynamics, &model)
                    .map_err(|e| OracleError::InvalidArgument(e.to_string()))?;
                let (gm, gv) = grid_moments(&density);
                mean_gap = mean_gap.max((gm - belief.mean()[0]).abs());
                var_gap = var_gap.max((gv - belief.covariance()[(0, 0)]).abs());
            }
            Ok(OracleComparison { transition: a, process_noise: gamma, max_mean_gap: mean_gap, max_variance_gap: var_gap })
        })
        .collect()
}

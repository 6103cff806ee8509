use nalgebra::DVector;

use super::dkf::{dkf_update, PosteriorPolicy};
use super::kalman::check_dims;
use super::{ekf_step, kalman_step, ukf_step, DiscriminativeModel, EkfOptions, FilterError, GenerativeModel, UkfParameters};
use crate::statespace::{GaussianBelief, LinearGaussianDynamics, TrajectoryDataset};

/// Which recursion to run, with its observation model.
#[derive(Clone, Copy)]
pub enum FilterModels<'a> {
    Kalman(&'a dyn GenerativeModel),
    Extended(&'a dyn GenerativeModel, EkfOptions),
    Unscented(&'a dyn GenerativeModel, UkfParameters),
    Discriminative(&'a dyn DiscriminativeModel, PosteriorPolicy),
}

/// Counts of non-fatal adjustments made while filtering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterWarnings {
    pub q_regularized: usize,
    pub prior_correction_dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    /// One posterior per observation.
    pub beliefs: Vec<GaussianBelief>,
    pub warnings: FilterWarnings,
}

impl FilterRun {
    pub fn means(&self) -> Vec<DVector<f64>> {
        self.beliefs.iter().map(|b| b.mean().clone()).collect()
    }
}

/// Filters `observations` starting from `initial`. Errors carry the 0-based
/// index of the failing observation.
pub fn filter_sequence(
    models: FilterModels<'_>,
    dynamics: &LinearGaussianDynamics,
    observations: &[DVector<f64>],
    initial: GaussianBelief,
) -> Result<FilterRun, FilterError> {
    let mut belief = initial;
    let mut beliefs = Vec::with_capacity(observations.len());
    let mut warnings = FilterWarnings::default();
    for (step, x) in observations.iter().enumerate() {
        let at = |source: FilterError| FilterError::AtStep { step, source: Box::new(source) };
        belief = match models {
            FilterModels::Kalman(obs) => kalman_step(&belief, x, dynamics, obs),
            FilterModels::Extended(obs, options) => ekf_step(&belief, x, dynamics, obs, &options),
            FilterModels::Unscented(obs, params) => ukf_step(&belief, x, dynamics, obs, &params),
            FilterModels::Discriminative(obs, policy) => {
                check_dims(&belief, x, dynamics, obs.state_dim(), obs.observation_dim()).map_err(at)?;
                let update = dkf_update(&belief, &obs.mean(x), &obs.covariance(x), dynamics, policy).map_err(at)?;
                warnings.q_regularized += usize::from(update.q_regularized);
                warnings.prior_correction_dropped += usize::from(update.prior_correction_dropped);
                Ok(update.belief)
            }
        }
        .map_err(at)?;
        beliefs.push(belief.clone());
    }
    Ok(FilterRun { beliefs, warnings })
}

/// Runs over the test segment of `dataset`, starting from the stationary
/// prior `N(0, S)`.
pub fn run_filter(
    models: FilterModels<'_>,
    dynamics: &LinearGaussianDynamics,
    dataset: &TrajectoryDataset,
) -> Result<FilterRun, FilterError> {
    filter_sequence(models, dynamics, dataset.test_observations(), GaussianBelief::stationary_prior(dynamics))
}

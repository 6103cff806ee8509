use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BenchError, FilterKind};
use crate::filters::{
    filter_sequence, EkfOptions, FilterError, FilterModels, FilterRun, GenerativeModel, LinearObservation,
    PosteriorPolicy, UkfParameters,
};
use crate::regression::{
    build_dkf_variant, fit_linear_observation, fit_mlp_observation, GpRegressor, GpRegressorDto, LearnedDiscriminative,
    LearnerOptions, MeanModel, MlpObservation, MlpRegressor, QEstimate,
};
use crate::rng::RandomSource;
use crate::statespace::{GaussianBelief, LinearGaussianDynamics, TrajectoryDataset};

pub const MODEL_FILE_VERSION: u32 = 1;
const MODEL_FILE_FORMAT: &str = "dkf-model";

#[derive(Debug, Clone)]
pub enum ObservationModel {
    Linear(LinearObservation),
    Network(MlpObservation),
    Discriminative(LearnedDiscriminative),
}

/// Fitted dynamics plus the observation model one filter needs.
#[derive(Debug, Clone)]
pub struct FittedFilter {
    kind: FilterKind,
    dynamics: LinearGaussianDynamics,
    observation: ObservationModel,
}

impl FittedFilter {
    /// Fits on the training segment of `dataset` only.
    pub fn fit(
        kind: FilterKind,
        dataset: &TrajectoryDataset,
        learners: &LearnerOptions,
        rng: &mut RandomSource,
    ) -> Result<Self, BenchError> {
        let z = dataset.train_states();
        let x = dataset.train_observations();
        let dynamics = LinearGaussianDynamics::fit_trajectory(z)?;
        let observation = match kind {
            FilterKind::Kalman => ObservationModel::Linear(fit_linear_observation(z, x)?),
            FilterKind::Ekf | FilterKind::Ukf => ObservationModel::Network(fit_mlp_observation(z, x, &learners.mlp, rng)?),
            FilterKind::Dkf(v) => ObservationModel::Discriminative(build_dkf_variant(v, dataset, learners, rng)?),
        };
        Self::new(kind, dynamics, observation)
    }

    pub fn new(kind: FilterKind, dynamics: LinearGaussianDynamics, observation: ObservationModel) -> Result<Self, BenchError> {
        let ok = matches!(
            (kind, &observation),
            (FilterKind::Kalman, ObservationModel::Linear(_))
                | (FilterKind::Ekf | FilterKind::Ukf, ObservationModel::Network(_))
                | (FilterKind::Dkf(_), ObservationModel::Discriminative(_))
        );
        if !ok {
            return Err(BenchError::ModelFormat(format!("{kind} cannot use this observation model")));
        }
        let state_dim = match &observation {
            ObservationModel::Linear(o) => o.state_dim(),
            ObservationModel::Network(o) => o.state_dim(),
            ObservationModel::Discriminative(o) => crate::filters::DiscriminativeModel::state_dim(o),
        };
        if state_dim != dynamics.dim() {
            return Err(BenchError::ModelFormat(format!("model state dim {state_dim}, dynamics dim {}", dynamics.dim())));
        }
        Ok(Self { kind, dynamics, observation })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn dynamics(&self) -> &LinearGaussianDynamics {
        &self.dynamics
    }

    pub fn observation(&self) -> &ObservationModel {
        &self.observation
    }

    pub fn observation_dim(&self) -> usize {
        match &self.observation {
            ObservationModel::Linear(o) => o.observation_dim(),
            ObservationModel::Network(o) => o.observation_dim(),
            ObservationModel::Discriminative(o) => crate::filters::DiscriminativeModel::observation_dim(o),
        }
    }

    /// Filters from the stationary prior `N(0, Ŝ)`.
    pub fn run(&self, observations: &[DVector<f64>]) -> Result<FilterRun, FilterError> {
        self.run_from(observations, GaussianBelief::stationary_prior(&self.dynamics))
    }

    pub fn run_from(&self, observations: &[DVector<f64>], initial: GaussianBelief) -> Result<FilterRun, FilterError> {
        let models = match (&self.observation, self.kind) {
            (ObservationModel::Linear(o), _) => FilterModels::Kalman(o),
            (ObservationModel::Network(o), FilterKind::Ekf) => FilterModels::Extended(o, EkfOptions::default()),
            (ObservationModel::Network(o), _) => FilterModels::Unscented(o, UkfParameters::default_for(self.dynamics.dim())),
            (ObservationModel::Discriminative(o), _) => FilterModels::Discriminative(o, PosteriorPolicy::DropPriorCorrection),
        };
        filter_sequence(models, &self.dynamics, observations, initial)
    }

    pub fn to_json(&self) -> Result<String, BenchError> {
        let observation = match &self.observation {
            ObservationModel::Linear(o) => ObservationDto::Linear {
                matrix: o.matrix().clone(),
                offset: o.offset().clone(),
                noise: o.noise_covariance().clone(),
            },
            ObservationModel::Network(o) => {
                ObservationDto::Network { network: o.network().clone(), noise: o.noise_covariance().clone() }
            }
            ObservationModel::Discriminative(o) => ObservationDto::Discriminative {
                mean: match o.mean_model() {
                    MeanModel::Gp(gp) => MeanDto::Gp(gp.to_dto()),
                    MeanModel::Mlp(net) => MeanDto::Mlp(net.clone()),
                },
                q: match o.q_estimate() {
                    QEstimate::GpDiagonal => QDto::GpDiagonal,
                    QEstimate::Constant(q) => QDto::Constant(q.clone()),
                },
            },
        };
        let file = ModelFile {
            format: MODEL_FILE_FORMAT.into(),
            version: MODEL_FILE_VERSION,
            kind: self.kind.name().into(),
            dynamics: DynamicsDto {
                transition: self.dynamics.transition().clone(),
                process_noise: self.dynamics.process_noise().clone(),
            },
            observation,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Rebuilds the model; GP factors are recomputed, so predictions match
    /// the saved model exactly.
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FILE_FORMAT {
            return Err(BenchError::ModelFormat(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != MODEL_FILE_VERSION {
            return Err(BenchError::ModelFormat(format!("unsupported version {}", file.version)));
        }
        let kind: FilterKind = file.kind.parse()?;
        let dynamics = LinearGaussianDynamics::new(file.dynamics.transition, file.dynamics.process_noise)?;
        let observation = match file.observation {
            ObservationDto::Linear { matrix, offset, noise } => {
                ObservationModel::Linear(LinearObservation::with_offset(matrix, offset, noise)?)
            }
            ObservationDto::Network { network, noise } => ObservationModel::Network(MlpObservation::new(network, noise)?),
            ObservationDto::Discriminative { mean, q } => {
                let mean = match mean {
                    MeanDto::Gp(dto) => MeanModel::Gp(GpRegressor::from_dto(dto)?),
                    MeanDto::Mlp(net) => MeanModel::Mlp(net),
                };
                let q = match q {
                    QDto::GpDiagonal => QEstimate::GpDiagonal,
                    QDto::Constant(m) => QEstimate::Constant(m),
                };
                ObservationModel::Discriminative(LearnedDiscriminative::new(mean, q)?)
            }
        };
        Self::new(kind, dynamics, observation)
    }

    pub fn save(&self, path: &Path) -> Result<(), BenchError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: String,
    dynamics: DynamicsDto,
    observation: ObservationDto,
}

#[derive(Serialize, Deserialize)]
struct DynamicsDto {
    transition: DMatrix<f64>,
    process_noise: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ObservationDto {
    Linear { matrix: DMatrix<f64>, offset: DVector<f64>, noise: DMatrix<f64> },
    Network { network: MlpRegressor, noise: DMatrix<f64> },
    Discriminative { mean: MeanDto, q: QDto },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MeanDto {
    Gp(GpRegressorDto),
    Mlp(MlpRegressor),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum QDto {
    GpDiagonal,
    Constant(DMatrix<f64>),
}

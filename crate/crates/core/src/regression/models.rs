use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::gp::{gp_fit, GpOptions, GpRegressor};
use super::mlp::{mlp_fit, MlpOptions, MlpRegressor};
use super::RegressionError;
use crate::filters::{DiscriminativeModel, GenerativeModel, LinearObservation};
use crate::linalg;
use crate::rng::RandomSource;
use crate::statespace::TrajectoryDataset;

/// DKF-GP-freq fits `f` on the first 80% of the training segment and
/// estimates `Q` on the last 20%.
pub const HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DkfVariant {
    Gp,
    GpFreq,
    Nn,
}

impl DkfVariant {
    pub fn name(self) -> &'static str {
        match self {
            DkfVariant::Gp => "dkf-gp",
            DkfVariant::GpFreq => "dkf-gp-freq",
            DkfVariant::Nn => "dkf-nn",
        }
    }
}

impl fmt::Display for DkfVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DkfVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dkf-gp" => Ok(DkfVariant::Gp),
            "dkf-gp-freq" => Ok(DkfVariant::GpFreq),
            "dkf-nn" => Ok(DkfVariant::Nn),
            other => Err(format!("unknown DKF variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnerOptions {
    pub gp: GpOptions,
    pub mlp: MlpOptions,
}

#[derive(Debug, Clone)]
pub enum MeanModel {
    Gp(GpRegressor),
    Mlp(MlpRegressor),
}

impl MeanModel {
    pub fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            MeanModel::Gp(gp) => gp.predict_mean(x),
            MeanModel::Mlp(mlp) => mlp.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QEstimate {
    /// `diag(q̂₁(x), …, q̂_d(x))` from the GP predictive variances.
    GpDiagonal,
    Constant(DMatrix<f64>),
}

/// A learned `(f, Q)` pair.
#[derive(Debug, Clone)]
pub struct LearnedDiscriminative {
    mean: MeanModel,
    q: QEstimate,
}

impl LearnedDiscriminative {
    pub fn new(mean: MeanModel, q: QEstimate) -> Result<Self, RegressionError> {
        let d = match &mean {
            MeanModel::Gp(gp) => gp.output_dim(),
            MeanModel::Mlp(mlp) => mlp.output_dim(),
        };
        match (&mean, &q) {
            (MeanModel::Mlp(_), QEstimate::GpDiagonal) => {
                return Err(RegressionError::Format("diagonal GP covariance needs a GP mean".into()))
            }
            (_, QEstimate::Constant(c)) if c.shape() != (d, d) => {
                return Err(RegressionError::DimensionMismatch(format!("Q is {:?}, state dimension {d}", c.shape())))
            }
            _ => {}
        }
        Ok(Self { mean, q })
    }

    pub fn mean_model(&self) -> &MeanModel {
        &self.mean
    }

    pub fn q_estimate(&self) -> &QEstimate {
        &self.q
    }
}

impl DiscriminativeModel for LearnedDiscriminative {
    fn state_dim(&self) -> usize {
        match &self.mean {
            MeanModel::Gp(gp) => gp.output_dim(),
            MeanModel::Mlp(mlp) => mlp.output_dim(),
        }
    }

    fn observation_dim(&self) -> usize {
        match &self.mean {
            MeanModel::Gp(gp) => gp.input_dim(),
            MeanModel::Mlp(mlp) => mlp.input_dim(),
        }
    }

    fn mean(&self, x: &DVector<f64>) -> DVector<f64> {
        self.mean.predict(x)
    }

    fn covariance(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match (&self.q, &self.mean) {
            (QEstimate::Constant(c), _) => c.clone(),
            (QEstimate::GpDiagonal, MeanModel::Gp(gp)) => DMatrix::from_diagonal(&gp.predict_q(x)),
            (QEstimate::GpDiagonal, MeanModel::Mlp(_)) => unreachable!("rejected by LearnedDiscriminative::new"),
        }
    }
}

/// `(1/n) Σ (z − f̂(x))(z − f̂(x))ᵀ` over held-out pairs, floored to be SPD.
pub fn fit_residual_q<'a>(
    f_hat: impl Fn(&DVector<f64>) -> DVector<f64>,
    heldout: impl IntoIterator<Item = (&'a DVector<f64>, &'a DVector<f64>)>,
) -> Result<DMatrix<f64>, RegressionError> {
    let residuals: Vec<DVector<f64>> = heldout.into_iter().map(|(x, z)| z - f_hat(x)).collect();
    let d = residuals.first().map_or(0, DVector::len);
    if residuals.len() < d + 1 || d == 0 {
        return Err(RegressionError::InsufficientData { needed: d.max(1) + 1, got: residuals.len() });
    }
    if residuals.iter().any(|r| r.len() != d) {
        return Err(RegressionError::DimensionMismatch("residuals have mixed dimensions".into()));
    }
    let (cov, _) = linalg::residual_covariance(d, &residuals);
    Ok(linalg::floor_covariance(&cov))
}

/// Fits one DKF observation model on the training segment of `train`.
pub fn build_dkf_variant(
    kind: DkfVariant,
    train: &TrajectoryDataset,
    options: &LearnerOptions,
    rng: &mut RandomSource,
) -> Result<LearnedDiscriminative, RegressionError> {
    let x = train.train_observations();
    let z = train.train_states();
    match kind {
        DkfVariant::Gp => {
            let gp = gp_fit(x, z, &options.gp, rng)?;
            LearnedDiscriminative::new(MeanModel::Gp(gp), QEstimate::GpDiagonal)
        }
        DkfVariant::GpFreq => {
            let n = x.len();
            let cut = ((1.0 - HOLDOUT_FRACTION) * n as f64).floor() as usize;
            let gp = gp_fit(&x[..cut], &z[..cut], &options.gp, rng)?;
            let q = fit_residual_q(|v| gp.predict_mean(v), x[cut..].iter().zip(&z[cut..]))?;
            LearnedDiscriminative::new(MeanModel::Gp(gp), QEstimate::Constant(q))
        }
        DkfVariant::Nn => {
            let fit = mlp_fit(x, z, &options.mlp, rng)?;
            let model = fit.model;
            let q = fit_residual_q(|v| model.predict(v), fit.partition.test.iter().map(|&i| (&x[i], &z[i])))?;
            LearnedDiscriminative::new(MeanModel::Mlp(model), QEstimate::Constant(q))
        }
    }
}

/// Least squares of `x` on `[z; 1]` with `Λ` the floored residual second
/// moment.
pub fn fit_linear_observation(
    states: &[DVector<f64>],
    observations: &[DVector<f64>],
) -> Result<LinearObservation, RegressionError> {
    if states.len() != observations.len() {
        return Err(RegressionError::DimensionMismatch(format!("{} states, {} observations", states.len(), observations.len())));
    }
    let d = states.first().map_or(0, DVector::len);
    let m = observations.first().map_or(0, DVector::len);
    if states.len() < d + 2 {
        return Err(RegressionError::InsufficientData { needed: d + 2, got: states.len() });
    }
    let augmented: Vec<DVector<f64>> = states.iter().map(|z| z.push(1.0)).collect();
    let ls = linalg::least_squares(augmented.iter().zip(observations), d + 1, m);
    let coef = ls
        .coefficients
        .ok_or_else(|| RegressionError::FitFailure("states do not span the regression design".into()))?;
    let h = coef.columns(0, d).into_owned();
    let c = coef.column(d).into_owned();
    let residuals: Vec<DVector<f64>> = augmented.iter().zip(observations).map(|(u, x)| x - &coef * u).collect();
    let (cov, _) = linalg::residual_covariance(m, &residuals);
    LinearObservation::with_offset(h, c, linalg::floor_covariance(&cov))
        .map_err(|e| RegressionError::FitFailure(e.to_string()))
}

/// Learned generative model `x = h(z) + v`, `h` an MLP, `v ~ N(0, Λ)`.
#[derive(Debug, Clone)]
pub struct MlpObservation {
    network: MlpRegressor,
    noise: DMatrix<f64>,
}

impl MlpObservation {
    pub fn new(network: MlpRegressor, noise: DMatrix<f64>) -> Result<Self, RegressionError> {
        let m = network.output_dim();
        if noise.shape() != (m, m) {
            return Err(RegressionError::DimensionMismatch(format!("noise is {:?}, network outputs {m}", noise.shape())));
        }
        if !linalg::is_positive_definite(&noise) {
            return Err(RegressionError::FitFailure("observation noise is not positive definite".into()));
        }
        Ok(Self { network, noise })
    }

    pub fn network(&self) -> &MlpRegressor {
        &self.network
    }
}

impl GenerativeModel for MlpObservation {
    fn state_dim(&self) -> usize {
        self.network.input_dim()
    }

    fn observation_dim(&self) -> usize {
        self.network.output_dim()
    }

    fn predict(&self, z: &DVector<f64>) -> DVector<f64> {
        self.network.predict(z)
    }

    fn noise_covariance(&self) -> &DMatrix<f64> {
        &self.noise
    }

    fn jacobian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.network.jacobian(z))
    }
}

/// Fits `h: z ↦ x` with the MLP; `Λ` from residuals on the network's
/// held-out test split.
pub fn fit_mlp_observation(
    states: &[DVector<f64>],
    observations: &[DVector<f64>],
    options: &MlpOptions,
    rng: &mut RandomSource,
) -> Result<MlpObservation, RegressionError> {
    let fit = mlp_fit(states, observations, options, rng)?;
    let network = fit.model;
    let noise = fit_residual_q(|z| network.predict(z), fit.partition.test.iter().map(|&i| (&states[i], &observations[i])))?;
    MlpObservation::new(network, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::generate_synthetic1;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn residual_q_examples() {
        let zero = |_: &DVector<f64>| v(&[0.0, 0.0]);
        let xs = vec![v(&[0.0]); 4];
        let zs = [v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 2.0]), v(&[0.0, -2.0])];
        let q = fit_residual_q(zero, xs.iter().zip(&zs)).unwrap();
        let eps = 1e-9 * 2.5 / 2.0;
        assert!((q[(0, 0)] - (0.5 + eps)).abs() < 1e-15);
        assert!((q[(1, 1)] - (2.0 + eps)).abs() < 1e-15);
        assert_eq!(q[(0, 1)], 0.0);

        let scalar = |_: &DVector<f64>| v(&[0.0]);
        let zs = [v(&[1.0]), v(&[-1.0])];
        let q = fit_residual_q(scalar, xs.iter().zip(&zs)).unwrap();
        assert!((q[(0, 0)] - 1.0).abs() < 1e-8);

        let exact = |x: &DVector<f64>| x.clone();
        let zs = [v(&[0.5]), v(&[-0.5])];
        let q = fit_residual_q(exact, zs.iter().zip(&zs)).unwrap();
        assert_eq!(q[(0, 0)], 1e-9);
    }

    #[test]
    fn residual_q_needs_enough_pairs() {
        let xs = [v(&[0.0])];
        let zs = [v(&[1.0, 1.0])];
        let r = fit_residual_q(|_| v(&[0.0, 0.0]), xs.iter().zip(&zs));
        assert!(matches!(r, Err(RegressionError::InsufficientData { needed: 3, got: 1 })));
    }

    #[test]
    fn linear_observation_recovers_coefficients() {
        let mut rng = RandomSource::new(3);
        let states: Vec<_> = (0..2000).map(|_| v(&[rng.standard_normal(), rng.standard_normal()])).collect();
        let observations: Vec<_> = states
            .iter()
            .map(|z| v(&[2.0 * z[0] - z[1] + 1.0 + 0.1 * rng.standard_normal(), 0.5 * z[1] - 3.0 + 0.1 * rng.standard_normal()]))
            .collect();
        let obs = fit_linear_observation(&states, &observations).unwrap();
        let expected_h = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 0.0, 0.5]);
        assert!((obs.matrix() - expected_h).amax() < 0.02);
        assert!((obs.offset() - v(&[1.0, -3.0])).amax() < 0.02);
        assert!((obs.noise_covariance()[(0, 0)] - 0.01).abs() < 0.002);
    }

    fn small_syn1() -> TrajectoryDataset {
        generate_synthetic1(600, 2, &mut RandomSource::new(17)).unwrap()
    }

    fn quick_options() -> LearnerOptions {
        LearnerOptions {
            gp: GpOptions { subsample_cap: 150, starts: 2, max_iterations: 15 },
            mlp: MlpOptions { max_epochs: 300, ..MlpOptions::default() },
        }
    }

    #[test]
    fn dkf_gp_covariance_is_diagonal() {
        let ds = small_syn1();
        let model = build_dkf_variant(DkfVariant::Gp, &ds, &quick_options(), &mut RandomSource::new(1)).unwrap();
        let mut rng = RandomSource::new(2);
        for _ in 0..20 {
            let x = v(&[rng.normal(0.0, 2.0), rng.normal(0.0, 2.0)]);
            let q = model.covariance(&x);
            assert_eq!(q.shape(), (1, 1));
            assert!(q[(0, 0)] > 0.0);
        }
    }

    #[test]
    fn dkf_gp_freq_uses_contiguous_holdout() {
        let ds = small_syn1();
        let opts = quick_options();
        let model = build_dkf_variant(DkfVariant::GpFreq, &ds, &opts, &mut RandomSource::new(1)).unwrap();
        // 300 training points: f on [0, 240), Q on [240, 300)
        let gp = match model.mean_model() {
            MeanModel::Gp(gp) => gp,
            MeanModel::Mlp(_) => panic!("expected a GP mean"),
        };
        assert_eq!(gp.training_size(), 150);
        let direct = gp_fit(&ds.train_observations()[..240], &ds.train_states()[..240], &opts.gp, &mut RandomSource::new(1)).unwrap();
        let x = ds.test_observations()[0].clone();
        assert_eq!(direct.predict_mean(&x), gp.predict_mean(&x));
        let q = fit_residual_q(|v| direct.predict_mean(v), ds.train_observations()[240..].iter().zip(&ds.train_states()[240..])).unwrap();
        assert_eq!(model.q_estimate(), &QEstimate::Constant(q));
    }

    #[test]
    fn dkf_nn_covariance_is_constant() {
        let ds = small_syn1();
        let model = build_dkf_variant(DkfVariant::Nn, &ds, &quick_options(), &mut RandomSource::new(1)).unwrap();
        let mut rng = RandomSource::new(4);
        let first = model.covariance(&v(&[0.0, 0.0]));
        for _ in 0..100 {
            let x = v(&[rng.normal(0.0, 3.0), rng.normal(0.0, 3.0)]);
            assert_eq!(model.covariance(&x), first);
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for k in [DkfVariant::Gp, DkfVariant::GpFreq, DkfVariant::Nn] {
            assert_eq!(k.name().parse::<DkfVariant>().unwrap(), k);
        }
        assert!("dkf".parse::<DkfVariant>().is_err());
    }
}

use faer::linalg::solvers::DenseSolveCore;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::kernel::{squared_distance, RbfKernel};
use super::standardize::Standardizer;
use super::RegressionError;
use crate::rng::RandomSource;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Kernel and noise parameters for one output dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub kernel: RbfKernel,
    pub noise_variance: f64,
}

impl GpHyperparameters {
    pub fn new(length_scale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Self { kernel: RbfKernel::new(length_scale, signal_variance), noise_variance }
    }

    fn from_log(theta: [f64; 3]) -> Self {
        Self::new(theta[0].exp(), theta[1].exp(), theta[2].exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpOptions {
    /// Training sets larger than this are subsampled uniformly at random.
    pub subsample_cap: usize,
    /// Number of grid points the ascent starts from.
    pub starts: usize,
    pub max_iterations: usize,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self { subsample_cap: 1000, starts: 8, max_iterations: 60 }
    }
}

#[derive(Debug, Clone)]
struct GpDimension {
    hyper: GpHyperparameters,
    targets: Vec<f64>,
    alpha: Vec<f64>,
    /// Lower Cholesky factor of `K + σ² I`.
    factor: Mat<f64>,
}

/// Independent GP regressors, one per output dimension, over shared
/// (standardized) training inputs.
#[derive(Debug, Clone)]
pub struct GpRegressor {
    standardizer: Standardizer,
    /// Standardized training inputs, one row per point.
    inputs: Vec<Vec<f64>>,
    dims: Vec<GpDimension>,
}

fn distance_matrix(rows: &[Vec<f64>]) -> Mat<f64> {
    let n = rows.len();
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = squared_distance(&rows[i], &rows[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn gram(dist: &Mat<f64>, h: &GpHyperparameters) -> Mat<f64> {
    let n = dist.nrows();
    Mat::from_fn(n, n, |i, j| {
        let k = h.kernel.eval_sq(dist[(i, j)]);
        if i == j { k + h.noise_variance } else { k }
    })
}

/// `L⁻ᵀ L⁻¹ y` for a lower factor `L`.
fn cholesky_solve(factor: &Mat<f64>, y: &[f64]) -> Vec<f64> {
    let mut rhs = Mat::from_fn(y.len(), 1, |i, _| y[i]);
    solve_lower_triangular_in_place(factor.as_ref(), rhs.as_mut(), Par::Seq);
    solve_upper_triangular_in_place(factor.transpose(), rhs.as_mut(), Par::Seq);
    (0..y.len()).map(|i| rhs[(i, 0)]).collect()
}

struct Evaluation {
    lml: f64,
    gradient: Option<[f64; 3]>,
}

/// Log marginal likelihood `−½ yᵀα − Σ ln L_ii − (n/2) ln 2π`, and optionally
/// its gradient in `(ln ℓ, ln s², ln σ²)`, `½ tr((ααᵀ − K⁻¹) ∂K)`.
fn evaluate(dist: &Mat<f64>, y: &[f64], h: &GpHyperparameters, with_gradient: bool) -> Option<Evaluation> {
    let n = y.len();
    let k = gram(dist, h);
    let llt = k.llt(Side::Lower).ok()?;
    let factor = llt.L().to_owned();
    let alpha = cholesky_solve(&factor, y);
    let log_det_half: f64 = (0..n).map(|i| factor[(i, i)].ln()).sum();
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let lml = -0.5 * fit - log_det_half - 0.5 * n as f64 * LN_2PI;
    if !lml.is_finite() {
        return None;
    }
    let gradient = with_gradient.then(|| {
        let k_inv = llt.inverse();
        let ell_sq = h.kernel.length_scale * h.kernel.length_scale;
        let (mut g_ell, mut g_sig, mut g_noise) = (0.0, 0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                let w = alpha[i] * alpha[j] - k_inv[(i, j)];
                let kf = if i == j { k[(i, j)] - h.noise_variance } else { k[(i, j)] };
                g_ell += w * kf * dist[(i, j)] / ell_sq;
                g_sig += w * kf;
                if i == j {
                    g_noise += w * h.noise_variance;
                }
            }
        }
        [0.5 * g_ell, 0.5 * g_sig, 0.5 * g_noise]
    });
    Some(Evaluation { lml, gradient })
}

fn median_distance(dist: &Mat<f64>) -> f64 {
    let n = dist.nrows();
    let mut all: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for i in (j + 1)..n {
            all.push(dist[(i, j)].sqrt());
        }
    }
    if all.is_empty() {
        return 1.0;
    }
    let mid = all.len() / 2;
    let (_, m, _) = all.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 { *m } else { 1.0 }
}

fn population_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Multi-start ascent of the log marginal likelihood in log space from the
/// best grid points.
fn fit_dimension(dist: &Mat<f64>, y: &[f64], options: &GpOptions) -> Result<GpHyperparameters, RegressionError> {
    let med = median_distance(dist);
    let var = match population_variance(y) {
        v if v > 0.0 && v.is_finite() => v,
        _ => 1.0,
    };
    let lower = [(1e-2 * med).ln(), (1e-4 * var).ln(), (1e-8 * var).ln()];
    let upper = [(1e2 * med).ln(), (1e4 * var).ln(), (1e2 * var).ln()];
    let clamp = |t: [f64; 3]| -> [f64; 3] { std::array::from_fn(|i| t[i].clamp(lower[i], upper[i])) };

    let mut grid = Vec::with_capacity(12);
    for ell in [0.1, 1.0, 10.0] {
        for sig in [0.1, 1.0] {
            for noise in [0.01, 0.1] {
                let theta = [(ell * med).ln(), (sig * var).ln(), (noise * var).ln()];
                if let Some(e) = evaluate(dist, y, &GpHyperparameters::from_log(theta), false) {
                    grid.push((theta, e.lml));
                }
            }
        }
    }
    grid.sort_by(|a, b| b.1.total_cmp(&a.1));
    grid.truncate(options.starts.max(1));

    let mut best: Option<([f64; 3], f64)> = None;
    for (start, _) in grid {
        if let Some((theta, lml)) = ascend(dist, y, start, &clamp, options.max_iterations) {
            if best.as_ref().is_none_or(|(_, l)| lml > *l) {
                best = Some((theta, lml));
            }
        }
    }
    best.map(|(t, _)| GpHyperparameters::from_log(t))
        .ok_or_else(|| RegressionError::FitFailure("no start produced a finite marginal likelihood".into()))
}

/// Projected quasi-Newton (BFGS) ascent from `start`, Armijo backtracking,
/// iterates clamped to the search box.
fn ascend(
    dist: &Mat<f64>,
    y: &[f64],
    start: [f64; 3],
    clamp: &impl Fn([f64; 3]) -> [f64; 3],
    max_iterations: usize,
) -> Option<([f64; 3], f64)> {
    let eval = |t: [f64; 3]| {
        evaluate(dist, y, &GpHyperparameters::from_log(t), true).map(|e| (e.lml, Vector3::from(e.gradient.expect("gradient requested"))))
    };
    let mut theta = Vector3::from(start);
    let (mut lml, mut grad) = eval(start)?;
    let initial_inverse = |g: &Vector3<f64>| Matrix3::identity() * (0.5 / g.norm().max(1e-12));
    let mut inv_hessian = initial_inverse(&grad);
    let mut fresh = true;
    for _ in 0..max_iterations {
        if grad.amax() <= 1e-8 * (1.0 + lml.abs()) {
            break;
        }
        // ascent direction on the log marginal likelihood
        let direction = inv_hessian * grad;
        let mut t = 1.0;
        let mut accepted = None;
        while t >= 1e-8 {
            let trial = Vector3::from(clamp((theta + direction * t).into()));
            let s = trial - theta;
            let slope = grad.dot(&s);
            if slope <= 0.0 {
                break;
            }
            match eval(trial.into()) {
                Some((l, g)) if l >= lml + 1e-4 * slope => {
                    accepted = Some((trial, s, l, g));
                    break;
                }
                _ => t *= 0.5,
            }
        }
        let Some((trial, s, new_lml, new_grad)) = accepted else {
            if fresh {
                break;
            }
            inv_hessian = initial_inverse(&grad);
            fresh = true;
            continue;
        };
        // curvature pair for the minimization of −lml
        let yv = grad - new_grad;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let left = Matrix3::identity() - s * yv.transpose() * rho;
            inv_hessian = left * inv_hessian * left.transpose() + s * s.transpose() * rho;
        }
        fresh = false;
        let gain = new_lml - lml;
        theta = trial;
        lml = new_lml;
        grad = new_grad;
        if gain < 1e-10 * (1.0 + lml.abs()) || s.amax() < 1e-9 {
            break;
        }
    }
    Some((theta.into(), lml))
}

/// Log marginal likelihood of `targets` under the GP with hyperparameters `h`,
/// on raw (unstandardized) inputs. `None` when `K + σ² I` is not positive definite.
pub fn log_marginal_likelihood(inputs: &[DVector<f64>], targets: &[f64], h: &GpHyperparameters) -> Option<f64> {
    let rows: Vec<Vec<f64>> = inputs.iter().map(|x| x.as_slice().to_vec()).collect();
    evaluate(&distance_matrix(&rows), targets, h, false).map(|e| e.lml)
}

fn check_training_data(inputs: &[DVector<f64>], targets: &[DVector<f64>], min: usize) -> Result<(usize, usize), RegressionError> {
    if inputs.len() != targets.len() {
        return Err(RegressionError::DimensionMismatch(format!("{} inputs, {} targets", inputs.len(), targets.len())));
    }
    if inputs.len() < min {
        return Err(RegressionError::InsufficientData { needed: min, got: inputs.len() });
    }
    let m = inputs[0].len();
    let d = targets[0].len();
    if inputs.iter().any(|x| x.len() != m) || targets.iter().any(|z| z.len() != d) {
        return Err(RegressionError::DimensionMismatch("ragged training data".into()));
    }
    if inputs.iter().chain(targets).any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(RegressionError::FitFailure("training data contains non-finite values".into()));
    }
    Ok((m, d))
}

/// Fits one GP per output dimension. Inputs are standardized, targets are not.
/// Training sets above `options.subsample_cap` are subsampled with `rng`.
pub fn gp_fit(
    inputs: &[DVector<f64>],
    targets: &[DVector<f64>],
    options: &GpOptions,
    rng: &mut RandomSource,
) -> Result<GpRegressor, RegressionError> {
    let (m, d) = check_training_data(inputs, targets, 2)?;
    let mut keep: Vec<usize> = (0..inputs.len()).collect();
    if inputs.len() > options.subsample_cap.max(2) {
        keep = rng.permutation(inputs.len());
        keep.truncate(options.subsample_cap.max(2));
        keep.sort_unstable();
    }
    let standardizer = Standardizer::fit(m, keep.iter().map(|&i| &inputs[i]));
    let rows: Vec<Vec<f64>> = keep.iter().map(|&i| standardizer.apply(&inputs[i]).as_slice().to_vec()).collect();
    let dist = distance_matrix(&rows);
    let mut columns = Vec::with_capacity(d);
    let mut hypers = Vec::with_capacity(d);
    for k in 0..d {
        let y: Vec<f64> = keep.iter().map(|&i| targets[i][k]).collect();
        hypers.push(fit_dimension(&dist, &y, options)?);
        columns.push(y);
    }
    GpRegressor::from_standardized(standardizer, rows, columns, hypers)
}

impl GpRegressor {
    /// A GP with given hyperparameters. `standardizer` maps raw inputs to the
    /// space the kernel acts on.
    pub fn new(
        inputs: &[DVector<f64>],
        targets: &[DVector<f64>],
        hyperparameters: Vec<GpHyperparameters>,
        standardizer: Standardizer,
    ) -> Result<Self, RegressionError> {
        let (m, d) = check_training_data(inputs, targets, 1)?;
        if standardizer.dim() != m || hyperparameters.len() != d {
            return Err(RegressionError::DimensionMismatch(format!(
                "standardizer has {} coordinates, {} hyperparameter sets for m={m}, d={d}",
                standardizer.dim(),
                hyperparameters.len()
            )));
        }
        let rows = inputs.iter().map(|x| standardizer.apply(x).as_slice().to_vec()).collect();
        let columns = (0..d).map(|k| targets.iter().map(|z| z[k]).collect()).collect();
        Self::from_standardized(standardizer, rows, columns, hyperparameters)
    }

    fn from_standardized(
        standardizer: Standardizer,
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        hyperparameters: Vec<GpHyperparameters>,
    ) -> Result<Self, RegressionError> {
        let dist = distance_matrix(&inputs);
        let dims = targets
            .into_iter()
            .zip(hyperparameters)
            .map(|(y, hyper)| {
                let factor = gram(&dist, &hyper)
                    .llt(Side::Lower)
                    .map_err(|_| RegressionError::FitFailure("kernel matrix is not positive definite".into()))?
                    .L()
                    .to_owned();
                let alpha = cholesky_solve(&factor, &y);
                Ok(GpDimension { hyper, targets: y, alpha, factor })
            })
            .collect::<Result<Vec<_>, RegressionError>>()?;
        Ok(Self { standardizer, inputs, dims })
    }

    pub fn input_dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.dims.len()
    }

    pub fn training_size(&self) -> usize {
        self.inputs.len()
    }

    pub fn hyperparameters(&self) -> Vec<GpHyperparameters> {
        self.dims.iter().map(|d| d.hyper).collect()
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    fn distances(&self, x: &DVector<f64>) -> Vec<f64> {
        let xs = self.standardizer.apply(x);
        self.inputs.iter().map(|r| squared_distance(xs.as_slice(), r)).collect()
    }

    /// `f̂(x) = K(x, X')(K(X', X') + σ² I)⁻¹ Z'`, per dimension.
    pub fn predict_mean(&self, x: &DVector<f64>) -> DVector<f64> {
        let dist = self.distances(x);
        DVector::from_iterator(
            self.dims.len(),
            self.dims.iter().map(|d| dist.iter().zip(&d.alpha).map(|(&r, a)| d.hyper.kernel.eval_sq(r) * a).sum()),
        )
    }

    /// `q̂(x) = s² − K(x, X')(K + σ² I)⁻¹K(X', x) + σ²`, per dimension.
    pub fn predict_q(&self, x: &DVector<f64>) -> DVector<f64> {
        self.predict(x).1
    }

    /// Mean and `q̂` sharing one distance computation.
    pub fn predict(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let dist = self.distances(x);
        let n = dist.len();
        let mut mean = DVector::zeros(self.dims.len());
        let mut q = DVector::zeros(self.dims.len());
        for (k, d) in self.dims.iter().enumerate() {
            let mut v = Mat::from_fn(n, 1, |i, _| d.hyper.kernel.eval_sq(dist[i]));
            mean[k] = (0..n).map(|i| v[(i, 0)] * d.alpha[i]).sum();
            solve_lower_triangular_in_place(d.factor.as_ref(), v.as_mut(), Par::Seq);
            let explained: f64 = (0..n).map(|i| v[(i, 0)] * v[(i, 0)]).sum();
            q[k] = (d.hyper.kernel.signal_variance - explained).max(0.0) + d.hyper.noise_variance;
        }
        (mean, q)
    }

    pub(crate) fn to_dto(&self) -> GpRegressorDto {
        GpRegressorDto {
            standardizer: self.standardizer.clone(),
            inputs: self.inputs.clone(),
            targets: self.dims.iter().map(|d| d.targets.clone()).collect(),
            hyperparameters: self.hyperparameters(),
        }
    }

    pub(crate) fn from_dto(dto: GpRegressorDto) -> Result<Self, RegressionError> {
        let m = dto.standardizer.dim();
        let n = dto.inputs.len();
        if n == 0 || dto.inputs.iter().any(|r| r.len() != m) || dto.targets.iter().any(|t| t.len() != n) || dto.targets.len() != dto.hyperparameters.len() {
            return Err(RegressionError::Format("inconsistent GP model shapes".into()));
        }
        Self::from_standardized(dto.standardizer, dto.inputs, dto.targets, dto.hyperparameters)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct GpRegressorDto {
    standardizer: Standardizer,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    hyperparameters: Vec<GpHyperparameters>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    /// Dense evaluation with an explicit Gram inverse.
    fn dense_predict(inputs: &[DVector<f64>], y: &[f64], h: &GpHyperparameters, x: &DVector<f64>) -> (f64, f64) {
        let n = inputs.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            h.kernel.eval(inputs[i].as_slice(), inputs[j].as_slice()) + if i == j { h.noise_variance } else { 0.0 }
        });
        let k_inv = k.try_inverse().unwrap();
        let kx = DVector::from_fn(n, |i, _| h.kernel.eval(x.as_slice(), inputs[i].as_slice()));
        let mean = (kx.transpose() * &k_inv * DVector::from_column_slice(y))[(0, 0)];
        let var = h.kernel.signal_variance - (kx.transpose() * &k_inv * &kx)[(0, 0)];
        (mean, var + h.noise_variance)
    }

    #[test]
    fn zero_targets_predict_zero() {
        let inputs: Vec<_> = (0..20).map(|i| v(&[i as f64 * 0.1, (i as f64).sin()])).collect();
        let targets: Vec<_> = (0..20).map(|_| v(&[0.0])).collect();
        let gp = gp_fit(&inputs, &targets, &GpOptions::default(), &mut RandomSource::new(1)).unwrap();
        for x in [v(&[0.3, 0.2]), v(&[5.0, -1.0])] {
            assert_eq!(gp.predict_mean(&x)[0], 0.0);
        }
    }

    #[test]
    fn two_point_marginal_likelihood() {
        let inputs = [v(&[0.0]), v(&[1.0])];
        let h = GpHyperparameters::new(1.0, 1.0, 0.1);
        let lml = log_marginal_likelihood(&inputs, &[0.0, 1.0], &h).unwrap();
        // K = [[1.1, e^{-1/2}], [e^{-1/2}, 1.1]]
        let c = (-0.5f64).exp();
        let det = 1.1 * 1.1 - c * c;
        let quad = 1.1 / det; // yᵀK⁻¹y with y = (0, 1)
        let expected = -0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln();
        assert!((lml - expected).abs() < 1e-12, "{lml} vs {expected}");
    }

    #[test]
    fn far_field_reverts_to_prior() {
        let inputs = [v(&[0.0]), v(&[1.0]), v(&[2.0])];
        let targets = [v(&[1.0]), v(&[-1.0]), v(&[0.5])];
        let h = GpHyperparameters::new(0.5, 2.0, 0.1);
        let gp = GpRegressor::new(&inputs, &targets, vec![h], Standardizer::identity(1)).unwrap();
        let (mean, q) = gp.predict(&v(&[1e3]));
        assert_eq!(mean[0], 0.0);
        assert!((q[0] - 2.1).abs() < 1e-15);
    }

    #[test]
    fn single_point_closed_forms() {
        let x = [v(&[0.7, -0.2])];
        let z = [v(&[3.0])];
        let exact = GpRegressor::new(&x, &z, vec![GpHyperparameters::new(1.0, 2.0, 0.0)], Standardizer::identity(2)).unwrap();
        let (mean, q) = exact.predict(&x[0]);
        assert!((mean[0] - 3.0).abs() < 1e-15);
        assert!(q[0].abs() < 1e-15);
        let noisy = GpRegressor::new(&x, &z, vec![GpHyperparameters::new(1.0, 2.0, 0.5)], Standardizer::identity(2)).unwrap();
        let (mean, q) = noisy.predict(&x[0]);
        assert!((mean[0] - 2.0 / 2.5 * 3.0).abs() < 1e-14);
        assert!((q[0] - (2.0 * 0.5 / 2.5 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn dense_evaluation_agreement() {
        let mut rng = RandomSource::new(5);
        for n in [5usize, 50, 200] {
            let inputs: Vec<_> = (0..n).map(|_| v(&[rng.standard_normal(), rng.standard_normal()])).collect();
            let targets: Vec<_> = inputs.iter().map(|x| v(&[x[0].sin() + 0.1 * rng.standard_normal(), x[1]])).collect();
            let hs = vec![GpHyperparameters::new(0.8, 1.3, 0.05), GpHyperparameters::new(2.0, 0.5, 0.2)];
            let gp = GpRegressor::new(&inputs, &targets, hs.clone(), Standardizer::identity(2)).unwrap();
            for _ in 0..10 {
                let x = v(&[2.0 * rng.standard_normal(), rng.standard_normal()]);
                let (mean, q) = gp.predict(&x);
                for k in 0..2 {
                    let y: Vec<f64> = targets.iter().map(|t| t[k]).collect();
                    let (dm, dq) = dense_predict(&inputs, &y, &hs[k], &x);
                    assert!((mean[k] - dm).abs() < 1e-10, "n={n} mean {} vs {dm}", mean[k]);
                    assert!((q[k] - dq).abs() < 1e-10, "n={n} q {} vs {dq}", q[k]);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RandomSource::new(9);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.standard_normal(), rng.standard_normal()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0].cos() + 0.2 * rng.standard_normal()).collect();
        let dist = distance_matrix(&rows);
        let theta = [0.3f64, -0.2, -2.0];
        let g = evaluate(&dist, &y, &GpHyperparameters::from_log(theta), true).unwrap().gradient.unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut p = theta;
            p[i] += h;
            let mut m = theta;
            m[i] -= h;
            let fd = (evaluate(&dist, &y, &GpHyperparameters::from_log(p), false).unwrap().lml
                - evaluate(&dist, &y, &GpHyperparameters::from_log(m), false).unwrap().lml)
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn recovers_noise_variance() {
        let mut rng = RandomSource::new(2024);
        let inputs: Vec<_> = (0..1000).map(|_| v(&[4.0 * rng.uniform() - 2.0])).collect();
        let targets: Vec<_> = inputs.iter().map(|x| v(&[(2.0 * x[0]).sin() + 0.2 * rng.standard_normal()])).collect();
        let gp = gp_fit(&inputs, &targets, &GpOptions::default(), &mut RandomSource::new(3)).unwrap();
        let s2 = gp.hyperparameters()[0].noise_variance;
        assert!((0.02..=0.08).contains(&s2), "fitted noise variance {s2}");
    }

    #[test]
    fn permuting_outputs_permutes_predictions() {
        let mut rng = RandomSource::new(11);
        let inputs: Vec<_> = (0..40).map(|_| v(&[rng.standard_normal()])).collect();
        let targets: Vec<_> = inputs.iter().map(|x| v(&[x[0].sin(), x[0] * x[0], rng.standard_normal()])).collect();
        let swapped: Vec<_> = targets.iter().map(|t| v(&[t[2], t[0], t[1]])).collect();
        let a = gp_fit(&inputs, &targets, &GpOptions::default(), &mut RandomSource::new(1)).unwrap();
        let b = gp_fit(&inputs, &swapped, &GpOptions::default(), &mut RandomSource::new(1)).unwrap();
        let x = v(&[0.3]);
        let (ma, qa) = a.predict(&x);
        let (mb, qb) = b.predict(&x);
        for (i, j) in [(2, 0), (0, 1), (1, 2)] {
            assert_eq!(ma[i], mb[j]);
            assert_eq!(qa[i], qb[j]);
        }
    }

    #[test]
    fn subsampling_respects_cap() {
        let inputs: Vec<_> = (0..300).map(|i| v(&[i as f64])).collect();
        let targets: Vec<_> = (0..300).map(|i| v(&[(i as f64 * 0.05).sin()])).collect();
        let options = GpOptions { subsample_cap: 50, ..GpOptions::default() };
        let gp = gp_fit(&inputs, &targets, &options, &mut RandomSource::new(4)).unwrap();
        assert_eq!(gp.training_size(), 50);
        let again = gp_fit(&inputs, &targets, &options, &mut RandomSource::new(4)).unwrap();
        assert_eq!(gp.predict_mean(&v(&[17.5])), again.predict_mean(&v(&[17.5])));
    }

    #[test]
    fn insufficient_data() {
        let r = gp_fit(&[v(&[0.0])], &[v(&[1.0])], &GpOptions::default(), &mut RandomSource::new(0));
        assert!(matches!(r, Err(RegressionError::InsufficientData { needed: 2, got: 1 })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn adding_a_point_never_increases_variance(
            xs in proptest::collection::vec(-3.0f64..3.0, 2..8),
            extra in -3.0f64..3.0,
            probe in -4.0f64..4.0,
            ell in 0.3f64..2.0,
            noise in 0.01f64..0.5,
        ) {
            let h = GpHyperparameters::new(ell, 1.0, noise);
            let inputs: Vec<_> = xs.iter().map(|&x| v(&[x])).collect();
            let targets: Vec<_> = xs.iter().map(|&x| v(&[x.sin()])).collect();
            let small = GpRegressor::new(&inputs, &targets, vec![h], Standardizer::identity(1)).unwrap();
            let mut more_in = inputs.clone();
            more_in.push(v(&[extra]));
            let mut more_t = targets.clone();
            more_t.push(v(&[0.0]));
            let big = GpRegressor::new(&more_in, &more_t, vec![h], Standardizer::identity(1)).unwrap();
            let x = v(&[probe]);
            let (qs, qb) = (small.predict_q(&x)[0], big.predict_q(&x)[0]);
            prop_assert!(qb <= qs + 1e-12);
            prop_assert!(qb >= noise);
        }
    }
}

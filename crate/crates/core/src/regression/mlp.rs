use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::RegressionError;
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpOptions {
    pub hidden_width: usize,
    /// Adam step size.
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: usize,
    /// Penalty `λ · mean(w²)` over the weight matrices (biases excluded).
    pub weight_decay: f64,
    pub train_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for MlpOptions {
    fn default() -> Self {
        Self {
            hidden_width: 20,
            learning_rate: 0.01,
            max_epochs: 3000,
            patience: 300,
            weight_decay: 1e-4,
            train_fraction: 0.70,
            validation_fraction: 0.15,
        }
    }
}

/// Indices of the train / validation / held-out test rows used by a fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpPartition {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// One hidden `tanh` layer and a linear output, on standardized inputs and
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRegressor {
    input: Standardizer,
    output: Standardizer,
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DMatrix<f64>,
    b2: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpFit {
    pub model: MlpRegressor,
    pub partition: MlpPartition,
    pub epochs: usize,
    pub validation_mse: f64,
}

impl MlpRegressor {
    /// `w1` is `H × m`, `w2` is `d × H`.
    pub fn from_parts(
        input: Standardizer,
        output: Standardizer,
        w1: DMatrix<f64>,
        b1: DVector<f64>,
        w2: DMatrix<f64>,
        b2: DVector<f64>,
    ) -> Result<Self, RegressionError> {
        let (h, m) = w1.shape();
        let d = w2.nrows();
        if input.dim() != m || b1.len() != h || w2.ncols() != h || b2.len() != d || output.dim() != d {
            return Err(RegressionError::DimensionMismatch(format!(
                "w1 {:?}, b1 {}, w2 {:?}, b2 {}, standardizers {}/{}",
                w1.shape(),
                b1.len(),
                w2.shape(),
                b2.len(),
                input.dim(),
                output.dim()
            )));
        }
        Ok(Self { input, output, w1, b1, w2, b2 })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.nrows()
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.nrows()
    }

    fn hidden(&self, xs: &DVector<f64>) -> DVector<f64> {
        (&self.w1 * xs + &self.b1).map(f64::tanh)
    }

    pub fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        let a = self.hidden(&self.input.apply(x));
        self.output.invert(&(&self.w2 * a + &self.b2))
    }

    /// `diag(out_scale) W₂ diag(1 − a²) W₁ diag(1 / in_scale)`.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let a = self.hidden(&self.input.apply(x));
        let mut inner = self.w1.clone();
        for (i, mut row) in inner.row_iter_mut().enumerate() {
            row *= 1.0 - a[i] * a[i];
        }
        let mut jac = &self.w2 * inner;
        for (i, mut row) in jac.row_iter_mut().enumerate() {
            row *= self.output.scale[i];
        }
        for (j, mut col) in jac.column_iter_mut().enumerate() {
            col /= self.input.scale[j];
        }
        jac
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        let mut k = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (pi, gi) in p.iter_mut().zip(g.iter()) {
                self.m[k] = B1 * self.m[k] + (1.0 - B1) * gi;
                self.v[k] = B2 * self.v[k] + (1.0 - B2) * gi * gi;
                *pi -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + 1e-8);
                k += 1;
            }
        }
    }
}

fn columns(rows: &[DVector<f64>], idx: &[usize], st: &Standardizer, dim: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(dim, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        out.set_column(c, &st.apply(&rows[i]));
    }
    out
}

fn forward(w1: &DMatrix<f64>, b1: &DVector<f64>, w2: &DMatrix<f64>, b2: &DVector<f64>, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut pre = w1 * x;
    for mut col in pre.column_iter_mut() {
        col += b1;
    }
    let a = pre.map(f64::tanh);
    let mut y = w2 * &a;
    for mut col in y.column_iter_mut() {
        col += b2;
    }
    (a, y)
}

fn mse(y: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    (y - t).norm_squared() / t.len() as f64
}

/// Full-batch Adam on `MSE + λ mean(w²)` over a seeded random 70/15/15
/// partition, keeping the weights with the best validation MSE.
pub fn mlp_fit(
    inputs: &[DVector<f64>],
    targets: &[DVector<f64>],
    options: &MlpOptions,
    rng: &mut RandomSource,
) -> Result<MlpFit, RegressionError> {
    let n = inputs.len();
    if targets.len() != n {
        return Err(RegressionError::DimensionMismatch(format!("{n} inputs, {} targets", targets.len())));
    }
    let hidden = options.hidden_width.max(1);
    if n < hidden.max(3) {
        return Err(RegressionError::InsufficientData { needed: hidden.max(3), got: n });
    }
    let m = inputs[0].len();
    let d = targets[0].len();
    if inputs.iter().any(|x| x.len() != m) || targets.iter().any(|z| z.len() != d) {
        return Err(RegressionError::DimensionMismatch("ragged training data".into()));
    }

    let order = rng.permutation(n);
    let n_train = ((options.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let n_val = ((options.validation_fraction * n as f64).round() as usize).clamp(1, n - n_train);
    let partition = MlpPartition {
        train: order[..n_train].to_vec(),
        validation: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };

    let input = Standardizer::fit(m, partition.train.iter().map(|&i| &inputs[i]));
    let output = Standardizer::fit(d, partition.train.iter().map(|&i| &targets[i]));
    let x_train = columns(inputs, &partition.train, &input, m);
    let t_train = columns(targets, &partition.train, &output, d);
    let x_val = columns(inputs, &partition.validation, &input, m);
    let t_val = columns(targets, &partition.validation, &output, d);
    if x_train.iter().chain(t_train.iter()).any(|v| !v.is_finite()) {
        return Err(RegressionError::FitFailure("training data contains non-finite values".into()));
    }

    let s1 = (1.0 / m as f64).sqrt();
    let s2 = (1.0 / hidden as f64).sqrt();
    let mut w1 = DMatrix::from_fn(hidden, m, |_, _| s1 * rng.standard_normal());
    let mut b1 = DVector::zeros(hidden);
    let mut w2 = DMatrix::from_fn(d, hidden, |_, _| s2 * rng.standard_normal());
    let mut b2 = DVector::zeros(d);

    let n_weights = (w1.len() + w2.len()) as f64;
    let decay = 2.0 * options.weight_decay / n_weights;
    let mut adam = Adam::new(w1.len() + b1.len() + w2.len() + b2.len());
    let mut best = (f64::INFINITY, w1.clone(), b1.clone(), w2.clone(), b2.clone());
    let mut since_best = 0usize;
    let mut epochs = 0usize;
    let scale = 2.0 / t_train.len() as f64;

    for epoch in 0..options.max_epochs {
        epochs = epoch + 1;
        let (a, y) = forward(&w1, &b1, &w2, &b2, &x_train);
        let dy = (&y - &t_train) * scale;
        let g_w2 = &dy * a.transpose() + &w2 * decay;
        let g_b2 = DVector::from_iterator(d, dy.row_iter().map(|r| r.sum()));
        let mut dz = w2.transpose() * &dy;
        dz.zip_apply(&a, |g, act| *g *= 1.0 - act * act);
        let g_w1 = &dz * x_train.transpose() + &w1 * decay;
        let g_b1 = DVector::from_iterator(hidden, dz.row_iter().map(|r| r.sum()));
        if g_w1.iter().chain(g_w2.iter()).any(|v| !v.is_finite()) {
            return Err(RegressionError::FitFailure(format!("non-finite gradient at epoch {epoch}")));
        }
        adam.step(
            &mut [w1.as_mut_slice(), b1.as_mut_slice(), w2.as_mut_slice(), b2.as_mut_slice()],
            &[g_w1.as_slice(), g_b1.as_slice(), g_w2.as_slice(), g_b2.as_slice()],
            options.learning_rate,
        );

        let val = mse(&forward(&w1, &b1, &w2, &b2, &x_val).1, &t_val);
        if !val.is_finite() {
            return Err(RegressionError::FitFailure(format!("non-finite validation loss at epoch {epoch}")));
        }
        if val < best.0 {
            best = (val, w1.clone(), b1.clone(), w2.clone(), b2.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= options.patience {
                break;
            }
        }
    }
    let (validation_mse, w1, b1, w2, b2) = best;
    if !validation_mse.is_finite() {
        return Err(RegressionError::FitFailure("no finite validation loss".into()));
    }
    Ok(MlpFit { model: MlpRegressor { input, output, w1, b1, w2, b2 }, partition, epochs, validation_mse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::generate_synthetic2;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn zero_weights_output_bias() {
        let model = MlpRegressor::from_parts(
            Standardizer::identity(3),
            Standardizer { mean: vec![1.0, -2.0], scale: vec![2.0, 0.5] },
            DMatrix::zeros(4, 3),
            DVector::zeros(4),
            DMatrix::zeros(2, 4),
            DVector::from_vec(vec![0.5, 4.0]),
        )
        .unwrap();
        let out = model.predict(&v(&[3.0, 1.0, -7.0]));
        assert_eq!(out.as_slice(), &[2.0, 0.0]);
    }

    /// Forward pass written out with explicit loops.
    fn loop_forward(model: &MlpRegressor, x: &DVector<f64>) -> Vec<f64> {
        let m = model.input_dim();
        let h = model.hidden_width();
        let d = model.output_dim();
        let xs: Vec<f64> = (0..m).map(|j| (x[j] - model.input.mean[j]) / model.input.scale[j]).collect();
        let mut a = vec![0.0; h];
        for i in 0..h {
            let mut s = model.b1[i];
            for j in 0..m {
                s += model.w1[(i, j)] * xs[j];
            }
            a[i] = s.tanh();
        }
        (0..d)
            .map(|k| {
                let mut s = model.b2[k];
                for i in 0..h {
                    s += model.w2[(k, i)] * a[i];
                }
                s * model.output.scale[k] + model.output.mean[k]
            })
            .collect()
    }

    fn random_model(rng: &mut RandomSource) -> MlpRegressor {
        MlpRegressor::from_parts(
            Standardizer { mean: vec![0.3, -1.0, 2.0], scale: vec![1.5, 0.2, 3.0] },
            Standardizer { mean: vec![5.0, 0.0], scale: vec![2.0, 0.1] },
            DMatrix::from_fn(7, 3, |_, _| rng.standard_normal()),
            DVector::from_fn(7, |_, _| rng.standard_normal()),
            DMatrix::from_fn(2, 7, |_, _| rng.standard_normal()),
            DVector::from_fn(2, |_, _| rng.standard_normal()),
        )
        .unwrap()
    }

    #[test]
    fn forward_pass_matches_loop_oracle() {
        let mut rng = RandomSource::new(8);
        let model = random_model(&mut rng);
        for _ in 0..10 {
            let x = v(&[rng.standard_normal(), rng.standard_normal(), rng.standard_normal()]);
            let out = model.predict(&x);
            let oracle = loop_forward(&model, &x);
            for k in 0..2 {
                assert!((out[k] - oracle[k]).abs() < 1e-12);
            }
            assert_eq!(out, model.predict(&x));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = RandomSource::new(12);
        let model = random_model(&mut rng);
        let x = v(&[0.4, -0.9, 1.7]);
        let jac = model.jacobian(&x);
        for j in 0..3 {
            let h = 1e-6;
            let mut p = x.clone();
            p[j] += h;
            let mut q = x.clone();
            q[j] -= h;
            let col = (model.predict(&p) - model.predict(&q)) / (2.0 * h);
            for k in 0..2 {
                assert!((jac[(k, j)] - col[k]).abs() < 1e-6 * (1.0 + col[k].abs()));
            }
        }
    }

    #[test]
    fn constant_target() {
        let inputs: Vec<_> = (0..200).map(|i| v(&[i as f64 / 100.0 - 1.0])).collect();
        let targets: Vec<_> = inputs.iter().map(|_| v(&[3.25])).collect();
        let fit = mlp_fit(&inputs, &targets, &MlpOptions::default(), &mut RandomSource::new(1)).unwrap();
        for x in &inputs {
            assert!((fit.model.predict(x)[0] - 3.25).abs() <= 1e-3);
        }
    }

    #[test]
    fn linear_target() {
        let inputs: Vec<_> = (0..500).map(|i| v(&[-1.0 + 2.0 * i as f64 / 499.0])).collect();
        let targets: Vec<_> = inputs.iter().map(|x| x * 2.0).collect();
        let fit = mlp_fit(&inputs, &targets, &MlpOptions::default(), &mut RandomSource::new(2)).unwrap();
        let train_mse = inputs.iter().zip(&targets).map(|(x, z)| (fit.model.predict(x) - z).norm_squared()).sum::<f64>() / 500.0;
        assert!(train_mse <= 1e-4, "training mse {train_mse}");
    }

    #[test]
    fn learns_sign_from_synthetic2() {
        let ds = generate_synthetic2(1000, &mut RandomSource::new(31)).unwrap();
        let fit = mlp_fit(ds.observations(), ds.states(), &MlpOptions::default(), &mut RandomSource::new(32)).unwrap();
        let neg = fit.model.predict(&v(&[2.0, -1.0]))[0];
        let pos = fit.model.predict(&v(&[2.0, 1.0]))[0];
        assert!((neg + 2.0).abs() <= 0.2, "(2, -1) -> {neg}");
        assert!((pos - 2.0).abs() <= 0.2, "(2, 1) -> {pos}");
    }

    #[test]
    fn deterministic_and_partitioned() {
        let inputs: Vec<_> = (0..100).map(|i| v(&[(i as f64).sin(), (i as f64).cos()])).collect();
        let targets: Vec<_> = inputs.iter().map(|x| v(&[x[0] * x[1]])).collect();
        let options = MlpOptions { max_epochs: 200, ..MlpOptions::default() };
        let a = mlp_fit(&inputs, &targets, &options, &mut RandomSource::new(5)).unwrap();
        let b = mlp_fit(&inputs, &targets, &options, &mut RandomSource::new(5)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.partition, b.partition);
        assert_eq!((a.partition.train.len(), a.partition.validation.len(), a.partition.test.len()), (70, 15, 15));
        let mut all: Vec<usize> = a.partition.train.iter().chain(&a.partition.validation).chain(&a.partition.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn too_few_points() {
        let inputs: Vec<_> = (0..10).map(|i| v(&[i as f64])).collect();
        let r = mlp_fit(&inputs, &inputs, &MlpOptions::default(), &mut RandomSource::new(0));
        assert!(matches!(r, Err(RegressionError::InsufficientData { needed: 20, got: 10 })));
    }
}

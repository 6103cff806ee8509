//! The two synthetic benchmark problems, both with scalar AR(1) states
//! `Z_t = 0.9 Z_{t-1} + γ_t`, `γ_t ~ N(0, 1)`, started from the stationary
//! distribution `N(0, 1/0.19)`.
//!
//! Draw order per time step (all from one [`RandomSource`]):
//!
//! * dataset 1: `γ_t` (or the stationary `Z_0` draw at `t = 0`), then for
//!   `k = 1..m` the pair `ζ_tk` (ternary) followed by `θ_tk` (normal).
//! * dataset 2: `γ_t` (or `Z_0`), then `θ_t1`, `θ_t2`.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::{StateSpaceError, TrajectoryDataset};
use crate::rng::RandomSource;

pub const SYNTHETIC_STATE_GAIN: f64 = 0.9;

fn stationary_std() -> f64 {
    (1.0 / (1.0 - SYNTHETIC_STATE_GAIN * SYNTHETIC_STATE_GAIN)).sqrt()
}

/// Sign with `sign(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `X_tk = arctan(Z_t / k) + π ζ_k + 0.2 θ_k` for `k = 1..m`.
pub fn synthetic1_observation(z: f64, zeta: &[i8], theta: &[f64]) -> DVector<f64> {
    assert_eq!(zeta.len(), theta.len());
    DVector::from_iterator(
        zeta.len(),
        zeta.iter().zip(theta).enumerate().map(|(k, (&zk, &tk))| {
            (z / (k + 1) as f64).atan() + PI * f64::from(zk) + 0.2 * tk
        }),
    )
}

/// `X_t = (|Z_t| + 0.1 θ_1, sign(Z_t) + 0.1 θ_2)`.
pub fn synthetic2_observation(z: f64, theta1: f64, theta2: f64) -> DVector<f64> {
    DVector::from_vec(vec![z.abs() + 0.1 * theta1, sign(z) + 0.1 * theta2])
}

fn next_state(t: usize, prev: f64, rng: &mut RandomSource) -> f64 {
    if t == 0 {
        stationary_std() * rng.standard_normal()
    } else {
        SYNTHETIC_STATE_GAIN * prev + rng.standard_normal()
    }
}

fn check_length(t: usize) -> Result<(), StateSpaceError> {
    if t < 2 {
        return Err(StateSpaceError::InvalidArgument(format!("T must be at least 2, got {t}")));
    }
    Ok(())
}

/// Dataset 1: arctan observations with three-cluster noise. Split at `T/2`.
pub fn generate_synthetic1(
    t_len: usize,
    m: usize,
    rng: &mut RandomSource,
) -> Result<TrajectoryDataset, StateSpaceError> {
    check_length(t_len)?;
    if m == 0 {
        return Err(StateSpaceError::InvalidArgument("m must be at least 1".into()));
    }
    let mut states = Vec::with_capacity(t_len);
    let mut observations = Vec::with_capacity(t_len);
    let mut zeta = vec![0i8; m];
    let mut theta = vec![0.0; m];
    let mut z = 0.0;
    for t in 0..t_len {
        z = next_state(t, z, rng);
        for k in 0..m {
            zeta[k] = rng.ternary();
            theta[k] = rng.standard_normal();
        }
        states.push(DVector::from_element(1, z));
        observations.push(synthetic1_observation(z, &zeta, &theta));
    }
    TrajectoryDataset::new(states, observations, t_len / 2, 0)
}

/// Dataset 2: absolute value and sign observations (`m = 2`). Split at `T/2`.
pub fn generate_synthetic2(t_len: usize, rng: &mut RandomSource) -> Result<TrajectoryDataset, StateSpaceError> {
    check_length(t_len)?;
    let mut states = Vec::with_capacity(t_len);
    let mut observations = Vec::with_capacity(t_len);
    let mut z = 0.0;
    for t in 0..t_len {
        z = next_state(t, z, rng);
        let theta1 = rng.standard_normal();
        let theta2 = rng.standard_normal();
        states.push(DVector::from_element(1, z));
        observations.push(synthetic2_observation(z, theta1, theta2));
    }
    TrajectoryDataset::new(states, observations, t_len / 2, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_observation1_is_arctan() {
        let z = 1.7;
        let x = synthetic1_observation(z, &[0, 0, 0], &[0.0, 0.0, 0.0]);
        for k in 0..3 {
            assert_eq!(x[k], (z / (k + 1) as f64).atan());
        }
    }

    #[test]
    fn noiseless_observation2() {
        assert_eq!(synthetic2_observation(-2.0, 0.0, 0.0), DVector::from_vec(vec![2.0, -1.0]));
        assert_eq!(synthetic2_observation(0.0, 0.0, 0.0), DVector::from_vec(vec![0.0, 0.0]));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_synthetic1(500, 3, &mut RandomSource::new(5)).unwrap();
        let b = generate_synthetic1(500, 3, &mut RandomSource::new(5)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic1(500, 3, &mut RandomSource::new(6)).unwrap();
        assert_ne!(a, c);
        let a = generate_synthetic2(500, &mut RandomSource::new(5)).unwrap();
        let b = generate_synthetic2(500, &mut RandomSource::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_and_shape() {
        let ds = generate_synthetic1(11, 4, &mut RandomSource::new(1)).unwrap();
        assert_eq!((ds.len(), ds.state_dim(), ds.observation_dim(), ds.split_index()), (11, 1, 4, 5));
        let ds = generate_synthetic2(10, &mut RandomSource::new(1)).unwrap();
        assert_eq!((ds.observation_dim(), ds.split_index()), (2, 5));
        assert!(generate_synthetic2(1, &mut RandomSource::new(1)).is_err());
        assert!(generate_synthetic1(10, 0, &mut RandomSource::new(1)).is_err());
    }

    #[test]
    fn stationary_state_variance() {
        let ds = generate_synthetic1(100_000, 1, &mut RandomSource::new(2024)).unwrap();
        let zs: Vec<f64> = ds.states().iter().map(|z| z[0]).collect();
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / zs.len() as f64;
        assert!((4.9..=5.7).contains(&var), "variance {var}");
    }

    #[test]
    fn observation1_noise_has_three_clusters() {
        let ds = generate_synthetic1(30_000, 2, &mut RandomSource::new(8)).unwrap();
        let mut clusters: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (z, x) in ds.states().iter().zip(ds.observations()) {
            for k in 0..2 {
                let noise = x[k] - (z[0] / (k + 1) as f64).atan();
                let c = (noise / PI).round();
                assert!((-1.0..=1.0).contains(&c));
                clusters[(c + 1.0) as usize].push(noise - c * PI);
            }
        }
        for c in &clusters {
            let n = c.len() as f64;
            assert!(n > 18_000.0 && n < 22_000.0);
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 0.01);
            assert!((sd - 0.2).abs() < 0.01, "cluster sd {sd}");
        }
    }

    #[test]
    fn observation2_sign_coordinate_is_centered() {
        let ds = generate_synthetic2(100_000, &mut RandomSource::new(0)).unwrap();
        let mean = ds.observations().iter().map(|x| x[1]).sum::<f64>() / ds.len() as f64;
        assert!(mean.abs() <= 0.02, "mean {mean}");
    }
}

use nalgebra::{DMatrix, DVector};

use crate::rng::RandomSource;
use crate::statespace::{StateSpaceError, TrajectoryDataset};

pub const SURROGATE_OBSERVATION_DIM: usize = 100;

const RHO: f64 = 0.98;
const ROTATION: f64 = 0.05;

/// Two-dimensional rotating AR(1) state with `N(0, I)` stationary law,
/// observed through `m` units with Gaussian tuning curves and Poisson counts.
/// Tuning parameters are drawn from `rng` before the trajectory.
pub fn generate_surrogate(t_len: usize, m: usize, rng: &mut RandomSource) -> Result<TrajectoryDataset, StateSpaceError> {
    if t_len < 2 || m == 0 {
        return Err(StateSpaceError::InvalidArgument(format!("need T >= 2 and m >= 1, got T={t_len}, m={m}")));
    }
    let units: Vec<Unit> = (0..m)
        .map(|_| Unit {
            center: [1.2 * rng.standard_normal(), 1.2 * rng.standard_normal()],
            width: 0.5 + 0.7 * rng.uniform(),
            peak: 2.0 + 6.0 * rng.uniform(),
            baseline: 0.1 + 0.4 * rng.uniform(),
        })
        .collect();
    let (c, s) = (ROTATION.cos(), ROTATION.sin());
    let a = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]) * RHO;
    let noise_sd = (1.0 - RHO * RHO).sqrt();
    let mut z = DVector::from_vec(vec![rng.standard_normal(), rng.standard_normal()]);
    let mut states = Vec::with_capacity(t_len);
    let mut observations = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        z = &a * &z + DVector::from_vec(vec![noise_sd * rng.standard_normal(), noise_sd * rng.standard_normal()]);
        let x = DVector::from_iterator(m, units.iter().map(|u| poisson(u.rate(&z), rng) as f64));
        states.push(z.clone());
        observations.push(x);
    }
    TrajectoryDataset::new(states, observations, t_len / 2, 0)
}

struct Unit {
    center: [f64; 2],
    width: f64,
    peak: f64,
    baseline: f64,
}

impl Unit {
    fn rate(&self, z: &DVector<f64>) -> f64 {
        let d2 = (z[0] - self.center[0]).powi(2) + (z[1] - self.center[1]).powi(2);
        self.baseline + self.peak * (-d2 / (2.0 * self.width * self.width)).exp()
    }
}

/// Knuth's product-of-uniforms sampler; fine for the small rates used here.
fn poisson(lambda: f64, rng: &mut RandomSource) -> u32 {
    let limit = (-lambda).exp();
    let mut k = 0;
    let mut p = rng.uniform();
    while p > limit {
        k += 1;
        p *= rng.uniform();
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_stationarity() {
        let ds = generate_surrogate(4000, SURROGATE_OBSERVATION_DIM, &mut RandomSource::new(1)).unwrap();
        assert_eq!((ds.state_dim(), ds.observation_dim(), ds.len()), (2, 100, 4000));
        let var: f64 = ds.states().iter().map(|z| z[0] * z[0]).sum::<f64>() / 4000.0;
        assert!((0.5..1.6).contains(&var), "{var}");
        assert!(ds.observations().iter().flatten().all(|&x| x >= 0.0 && x.fract() == 0.0));
    }

    #[test]
    fn poisson_moments() {
        let mut rng = RandomSource::new(8);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| poisson(3.0, &mut rng) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 0.06, "{mean}");
        assert!((var - 3.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn seeded() {
        let a = generate_surrogate(50, 5, &mut RandomSource::new(4)).unwrap();
        let b = generate_surrogate(50, 5, &mut RandomSource::new(4)).unwrap();
        assert_eq!(a.observations(), b.observations());
    }
}

use serde::{Deserialize, Serialize};

/// `K(x, x') = s² exp(−‖x − x'‖² / (2ℓ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    pub length_scale: f64,
    pub signal_variance: f64,
}

impl RbfKernel {
    pub fn new(length_scale: f64, signal_variance: f64) -> Self {
        Self { length_scale, signal_variance }
    }

    /// Kernel value from a squared distance.
    #[inline]
    pub fn eval_sq(&self, dist_sq: f64) -> f64 {
        self.signal_variance * (-0.5 * dist_sq / (self.length_scale * self.length_scale)).exp()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval_sq(squared_distance(a, b))
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let k = RbfKernel::new(2.0, 3.0);
        assert_eq!(k.eval(&[1.0, 2.0], &[1.0, 2.0]), 3.0);
        let v = k.eval(&[0.0, 0.0], &[3.0, 4.0]);
        assert!((v - 3.0 * (-25.0f64 / 8.0).exp()).abs() < 1e-15);
        assert_eq!(v, k.eval(&[3.0, 4.0], &[0.0, 0.0]));
    }
}

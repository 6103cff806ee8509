use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Per-coordinate affine map `(v − mean) / scale`. Constant coordinates get
/// scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of `rows`.
    pub fn fit<'a>(dim: usize, rows: impl IntoIterator<Item = &'a DVector<f64>>) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sum_sq = vec![0.0; dim];
        let rows: Vec<&DVector<f64>> = rows.into_iter().collect();
        for r in &rows {
            for (i, v) in r.iter().enumerate() {
                sum[i] += v;
            }
            n += 1;
        }
        let mean: Vec<f64> = sum.iter().map(|s| if n > 0 { s / n as f64 } else { 0.0 }).collect();
        for r in &rows {
            for (i, v) in r.iter().enumerate() {
                sum_sq[i] += (v - mean[i]).powi(2);
            }
        }
        let scale = sum_sq
            .iter()
            .map(|s| {
                let sd = if n > 0 { (s / n as f64).sqrt() } else { 0.0 };
                if sd > 0.0 && sd.is_finite() { sd } else { 1.0 }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().enumerate().map(|(i, x)| (x - self.mean[i]) / self.scale[i]))
    }

    pub fn invert(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().enumerate().map(|(i, x)| x * self.scale[i] + self.mean[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_keeps_unit_scale() {
        let rows = vec![DVector::from_vec(vec![1.0, 3.0]), DVector::from_vec(vec![3.0, 3.0])];
        let s = Standardizer::fit(2, &rows);
        assert_eq!(s.mean, vec![2.0, 3.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        let z = s.apply(&rows[0]);
        assert_eq!(z.as_slice(), &[-1.0, 0.0]);
        assert_eq!(s.invert(&z), rows[0]);
    }
}

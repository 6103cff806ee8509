use nalgebra::DVector;

use super::BenchError;

/// `(Σ_t ‖pred_t − z_t‖² / T) / Σ_i Var_i(z)`, population variances of the
/// truth.
pub fn normalized_mse(predicted: &[DVector<f64>], truth: &[DVector<f64>]) -> Result<f64, BenchError> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(BenchError::LengthMismatch { predicted: predicted.len(), truth: truth.len() });
    }
    let d = truth[0].len();
    if predicted.iter().chain(truth).any(|v| v.len() != d) {
        return Err(BenchError::LengthMismatch { predicted: predicted.len(), truth: truth.len() });
    }
    let n = truth.len() as f64;
    let mean = truth.iter().fold(DVector::zeros(d), |acc, z| acc + z) / n;
    let total_var: f64 = truth.iter().map(|z| (z - &mean).norm_squared()).sum::<f64>() / n;
    if total_var <= 0.0 {
        return Err(BenchError::ZeroVariance);
    }
    let mse: f64 = predicted.iter().zip(truth).map(|(p, z)| (p - z).norm_squared()).sum::<f64>() / n;
    Ok(mse / total_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(v: &[(f64, f64)]) -> Vec<DVector<f64>> {
        v.iter().map(|&(a, b)| DVector::from_vec(vec![a, b])).collect()
    }

    #[test]
    fn perfect_and_mean_predictors() {
        let truth = series(&[(1.0, 0.0), (2.0, 5.0), (-3.0, 1.0), (0.5, 2.0)]);
        assert_eq!(normalized_mse(&truth, &truth).unwrap(), 0.0);
        let mean = truth.iter().fold(DVector::zeros(2), |a, z| a + z) / 4.0;
        let flat = vec![mean; 4];
        assert!((normalized_mse(&flat, &truth).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let truth = series(&[(1.0, 2.0), (1.0, 2.0)]);
        assert!(matches!(normalized_mse(&truth, &truth), Err(BenchError::ZeroVariance)));
        assert!(matches!(normalized_mse(&truth[..1], &truth), Err(BenchError::LengthMismatch { .. })));
        assert!(matches!(normalized_mse(&[], &[]), Err(BenchError::LengthMismatch { .. })));
    }

    proptest! {
        #[test]
        fn scale_invariant(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 3..40),
            c in 0.01f64..100.0,
        ) {
            let truth: Vec<_> = pts.iter().map(|p| DVector::from_vec(vec![p.0, p.1])).collect();
            let pred: Vec<_> = pts.iter().map(|p| DVector::from_vec(vec![p.2, p.3])).collect();
            let base = normalized_mse(&pred, &truth).unwrap();
            let scaled_t: Vec<_> = truth.iter().map(|v| v * c).collect();
            let scaled_p: Vec<_> = pred.iter().map(|v| v * c).collect();
            let scaled = normalized_mse(&scaled_p, &scaled_t).unwrap();
            prop_assert!(base >= 0.0);
            prop_assert!((base - scaled).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn mean_predictor_is_one(pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..40)) {
            let truth: Vec<_> = pts.iter().map(|p| DVector::from_vec(vec![p.0, p.1])).collect();
            let n = truth.len() as f64;
            let mean = truth.iter().fold(DVector::zeros(2), |a, z| a + z) / n;
            prop_assume!(truth.iter().map(|z| (z - &mean).norm_squared()).sum::<f64>() > 1e-9);
            let flat = vec![mean; truth.len()];
            prop_assert!((normalized_mse(&flat, &truth).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}

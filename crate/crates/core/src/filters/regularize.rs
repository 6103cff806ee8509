use nalgebra::{DMatrix, SymmetricEigen};

use crate::linalg;

/// Eigenvalues of the `S`-whitened `Q` are clipped into `[ε, 1 − ε]`.
pub const Q_CLIP_EPSILON: f64 = 1e-6;

/// Acceptance tolerance on the whitened eigenvalues before clipping kicks in.
const EIGEN_TOLERANCE: f64 = 1e-12;

/// Enforces `Q ≻ 0` and `S − Q ⪰ 0`. See [`regularize_q_checked`].
pub fn regularize_q(qx: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    regularize_q_checked(qx, s).0
}

/// Returns `(Q', modified)`.
///
/// With `S = L Lᵀ`, the whitened matrix `W = L⁻¹ Q Lᵀ⁻¹` has eigenvalues in
/// `(0, 1]` exactly when `Q ≻ 0` and `S − Q ⪰ 0`. If that already holds the
/// input is returned untouched; otherwise the eigenvalues of `W` are clipped
/// into `[ε, 1 − ε]` and mapped back through `L`. Whitening with the
/// Cholesky factor and with the symmetric root `S^{1/2}` give the same result,
/// since the two differ by an orthogonal rotation that commutes with clipping.
pub fn regularize_q_checked(qx: &DMatrix<f64>, s: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let q = linalg::symmetrize(qx);
    let Some(chol) = linalg::cholesky(s) else {
        return (q, false);
    };
    let l = chol.l();
    let Some(w) = l
        .solve_lower_triangular(&q)
        .and_then(|lq| l.solve_lower_triangular(&lq.transpose()))
    else {
        return (q, false);
    };
    let eig = SymmetricEigen::new(linalg::symmetrize(&w));
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if lo > EIGEN_TOLERANCE && hi <= 1.0 + EIGEN_TOLERANCE {
        return (qx.clone(), false);
    }
    let clipped = eig
        .eigenvalues
        .map(|v| if v.is_nan() { Q_CLIP_EPSILON } else { v.clamp(Q_CLIP_EPSILON, 1.0 - Q_CLIP_EPSILON) });
    let w_clipped = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    (linalg::symmetrize(&(&l * w_clipped * l.transpose())), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    #[test]
    fn valid_input_is_unchanged() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = &s * 0.5;
        let (out, modified) = regularize_q_checked(&q, &s);
        assert!(!modified);
        assert_eq!(out, q);
    }

    #[test]
    fn scalar_clipping() {
        let out = regularize_q(&DMatrix::from_element(1, 1, 9.0), &DMatrix::from_element(1, 1, 4.0));
        assert!((out[(0, 0)] - 4.0 * (1.0 - 1e-6)).abs() < 1e-12);
        assert!((out[(0, 0)] - 3.999_996).abs() < 1e-9);
    }

    #[test]
    fn negative_direction_is_floored() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![-0.1, 1.0]));
        let (out, modified) = regularize_q_checked(&q, &s);
        assert!(modified);
        assert!((out[(0, 0)] - 2e-6).abs() < 1e-15);
        assert!((out[(1, 1)] - 1.0).abs() < 1e-14);
        assert!(out[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn rotated_negative_direction() {
        // S eigendirection (1, 1)/√2 with eigenvalue 2, Q eigenvalue −0.1 there
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v = DMatrix::from_row_slice(2, 2, &[r, -r, r, r]);
        let s = &v * DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0])) * v.transpose();
        let q = &v * DMatrix::from_diagonal(&DVector::from_vec(vec![-0.1, 1.0])) * v.transpose();
        let out = regularize_q(&q, &s);
        let along = (v.column(0).transpose() * &out * v.column(0))[(0, 0)];
        assert!((along - 2e-6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn output_is_valid(raw_q in proptest::collection::vec(-3.0f64..3.0, 9), raw_s in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let q = DMatrix::from_vec(3, 3, raw_q);
            let q = linalg::symmetrize(&q);
            let s = DMatrix::from_vec(3, 3, raw_s);
            let s = &s * s.transpose() + DMatrix::identity(3, 3) * 0.5;
            let out = regularize_q(&q, &s);
            prop_assert!(linalg::is_positive_definite(&out));
            prop_assert!(linalg::min_eigenvalue(&(&s - &out)) >= -1e-10 * s.norm());
        }
    }
}

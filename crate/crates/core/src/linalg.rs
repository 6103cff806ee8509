//! Small dense-matrix helpers shared by the filters and learners.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Cholesky::new(m.clone())
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    cholesky(m).map(|c| symmetrize(&c.inverse()))
}

pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).min()
}

/// True when `m` is symmetric and every eigenvalue is strictly positive.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.nrows() > 0 && is_symmetric(m, 1e-10) && cholesky(&symmetrize(m)).is_some()
}

/// Spectral radius estimate from Gelfand's formula, `ρ(A) = lim ‖A^k‖^(1/k)`,
/// evaluated by repeated squaring (a power iteration on the matrix itself)
/// with per-step normalization.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let n0 = a.norm();
    if n0 == 0.0 {
        return 0.0;
    }
    if !n0.is_finite() {
        return f64::INFINITY;
    }
    // invariant: b = A^p / ‖A^p‖, log_norm = ln ‖A^p‖
    let mut b = a / n0;
    let mut log_norm = n0.ln();
    let mut power = 1.0;
    for _ in 0..64 {
        let sq = &b * &b;
        let q = sq.norm();
        if q == 0.0 {
            return 0.0;
        }
        log_norm = 2.0 * log_norm + q.ln();
        power *= 2.0;
        b = sq / q;
    }
    (log_norm / power).exp()
}

/// Sample second-moment matrix `(1/n) Σ r rᵀ` of residual vectors.
pub fn residual_covariance<'a>(
    dim: usize,
    residuals: impl IntoIterator<Item = &'a DVector<f64>>,
) -> (DMatrix<f64>, usize) {
    let mut acc = DMatrix::zeros(dim, dim);
    let mut n = 0usize;
    for r in residuals {
        acc.ger(1.0, r, r, 1.0);
        n += 1;
    }
    if n > 0 {
        acc /= n as f64;
    }
    (symmetrize(&acc), n)
}

/// Adds `ε·I` with `ε = 1e-9·trace/d`, or `1e-9` when the trace is zero.
pub fn floor_covariance(c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = c.nrows();
    let trace = c.trace();
    let eps = if trace > 0.0 { 1e-9 * trace / d as f64 } else { 1e-9 };
    let mut out = symmetrize(c);
    for i in 0..d {
        out[(i, i)] += eps;
    }
    out
}

/// Least-squares coefficient matrix `B` minimizing `Σ ‖y − B u‖²` over the
/// `(u, y)` pairs. `coefficients` is `None` when the design Gram matrix is
/// numerically rank deficient.
pub(crate) fn least_squares<'a>(
    pairs: impl IntoIterator<Item = (&'a DVector<f64>, &'a DVector<f64>)>,
    in_dim: usize,
    out_dim: usize,
) -> LeastSquares {
    let mut gram = DMatrix::zeros(in_dim, in_dim);
    let mut cross = DMatrix::zeros(out_dim, in_dim);
    let mut n = 0usize;
    for (u, y) in pairs {
        gram.ger(1.0, u, u, 1.0);
        cross.ger(1.0, y, u, 1.0);
        n += 1;
    }
    let eig = symmetric_eigenvalues(&gram);
    let (lo, hi) = (eig.min(), eig.max());
    let well_posed = hi > 0.0 && lo > 1e-12 * hi;
    let coefficients = if well_posed {
        // Bᵀ = G⁻¹ Cᵀ
        cholesky(&symmetrize(&gram)).map(|c| c.solve(&cross.transpose()).transpose())
    } else {
        None
    };
    LeastSquares { coefficients, samples: n }
}

pub(crate) struct LeastSquares {
    pub coefficients: Option<DMatrix<f64>>,
    pub samples: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_of_rotation() {
        // complex eigenvalues 0.9·e^{±iθ}
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let a = DMatrix::from_row_slice(2, 2, &[0.9 * c, -0.9 * s, 0.9 * s, 0.9 * c]);
        assert!((spectral_radius(&a) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_of_jordan_block() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 10.0, 0.0, 0.5]);
        assert!((spectral_radius(&a) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_nilpotent_and_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(spectral_radius(&a), 0.0);
        assert_eq!(spectral_radius(&DMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn spectral_radius_matches_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, -0.95, 0.7]));
        assert!((spectral_radius(&a) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn floor_of_zero_matrix() {
        let f = floor_covariance(&DMatrix::zeros(2, 2));
        assert_eq!(f, DMatrix::identity(2, 2) * 1e-9);
    }

    #[test]
    fn symmetry_check() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-14, 3.0]);
        assert!(is_symmetric(&m, 1e-12));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 3.0]);
        assert!(!is_symmetric(&m, 1e-12));
    }
}

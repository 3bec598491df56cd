//! Cholesky factorization, used as the positive-definiteness test.

use crate::matrix::Matrix;

/// Lower-triangular L with L L^T = S, or `None` when S is not positive
/// definite.
pub fn cholesky(s: &Matrix) -> Option<Matrix> {
    assert!(s.is_square(), "cholesky: matrix must be square");
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = s[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Some(l)
}

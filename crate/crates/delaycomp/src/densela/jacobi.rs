//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone)]
pub struct SymEigResult {
    /// Eigenvalues sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal matrix whose columns are the matching eigenvectors.
    pub eigenvectors: Matrix,
}

/// Full spectral decomposition of a symmetric matrix. The input is
/// symmetrized as (S + S^T)/2 before decomposition; sweeps stop when every
/// off-diagonal is below 1e-14 * ||S||_F.
pub fn sym_eig(s: &Matrix) -> Result<SymEigResult> {
    s.check_square("sym_eig")?;
    s.check_finite("sym_eig")?;
    let n = s.rows();
    let mut a = s.sym_part();
    let mut v = Matrix::identity(n);
    let norm = a.norm_fro().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * norm;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    // sort ascending, carrying eigenvectors along
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues: Vec<f64> = idx.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (newc, &oldc) in idx.iter().enumerate() {
        for r in 0..n {
            eigenvectors[(r, newc)] = v[(r, oldc)];
        }
    }
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

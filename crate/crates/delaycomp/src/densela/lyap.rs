//! Continuous Lyapunov equation by Kronecker vectorization. Adequate at desk
//! scale (state dimension up to ~25).

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::lu::solve_linear;
use super::schur::max_real_part;

/// Solve F^T X + X F + W = 0 for symmetric X, requiring F Hurwitz.
pub fn solve_lyapunov(f: &Matrix, w: &Matrix) -> Result<Matrix> {
    f.check_square("solve_lyapunov")?;
    w.check_square("solve_lyapunov")?;
    if f.rows() != w.rows() {
        return Err(Error::Dimension("solve_lyapunov: F and W sizes differ".into()));
    }
    let max_re = max_real_part(f)?;
    if max_re >= -1e-10 {
        return Err(Error::NonHurwitz { max_re });
    }
    let n = f.rows();
    let ft = f.transpose();
    // column-major vec: vec(F^T X) = (I (x) F^T) vec(X), vec(X F) = (F^T (x) I) vec(X)
    let id = Matrix::identity(n);
    let m = &kron(&id, &ft) + &kron(&ft, &id);
    let mut rhs = Matrix::zeros(n * n, 1);
    for j in 0..n {
        for i in 0..n {
            rhs[(j * n + i, 0)] = -w[(i, j)];
        }
    }
    let xv = solve_linear(&m, &rhs)?;
    let mut x = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            x[(i, j)] = xv[(j * n + i, 0)];
        }
    }
    Ok(x.sym_part())
}

/// Kronecker product A (x) B.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for k in 0..b.rows() {
                for l in 0..b.cols() {
                    out[(i * b.rows() + k, j * b.cols() + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

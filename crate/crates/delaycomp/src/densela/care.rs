//! Continuous algebraic Riccati equation via Newton-Kleinman iteration with
//! a pole-placement initial stabilizing gain.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::lu::solve_linear;
use super::lyap::solve_lyapunov;
use super::pole::pole_place_siso;
use super::schur::max_real_part;

const RESIDUAL_TOL: f64 = 1e-9;
const MAX_ITER: usize = 50;

/// Solve A^T P + P A - P B R^{-1} B^T P + Q = 0 and return (P, K) with
/// K = -R^{-1} B^T P and A + B K Hurwitz.
pub fn solve_care(a: &Matrix, b: &Matrix, qw: &Matrix, rw: &Matrix) -> Result<(Matrix, Matrix)> {
    a.check_square("solve_care")?;
    qw.check_square("solve_care")?;
    rw.check_square("solve_care")?;
    let n = a.rows();
    if b.rows() != n || b.cols() != rw.rows() {
        return Err(Error::Dimension("solve_care: B/R dimensions inconsistent".into()));
    }

    // deterministic stabilizing start: poles at -1, -2, ..., -n
    let init_poles: Vec<(f64, f64)> = (1..=n).map(|i| (-(i as f64), 0.0)).collect();
    let mut k = pole_place_siso(a, b, &init_poles)?;

    let mut best_res = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let acl = a + &(b * &k);
        let w = &(qw + &(&(&k.transpose() * rw) * &k)) * &Matrix::identity(n);
        let p = solve_lyapunov(&acl, &w)?;
        // K = -R^{-1} B^T P
        let btp = &b.transpose() * &p;
        k = solve_linear(rw, &btp)?.scale(-1.0);

        let res = care_residual(a, b, qw, rw, &p)?;
        if res < RESIDUAL_TOL {
            let max_re = max_real_part(&(a + &(b * &k)))?;
            if max_re >= -1e-9 {
                return Err(Error::NonHurwitz { max_re });
            }
            return Ok((p, k));
        }
        if res < best_res {
            best_res = res;
        }
    }
    Err(Error::Convergence(format!(
        "Newton-Kleinman CARE iteration stalled at residual {best_res:.3e}"
    )))
}

fn care_residual(a: &Matrix, b: &Matrix, qw: &Matrix, rw: &Matrix, p: &Matrix) -> Result<f64> {
    let btp = &b.transpose() * p;
    let rinv_btp = solve_linear(rw, &btp)?;
    let quad = &btp.transpose() * &rinv_btp;
    let res = &(&(&(&a.transpose() * p) + &(p * a)) - &quad) + qw;
    Ok(res.norm_fro())
}

//! Shifted Legendre polynomials on [0, D] and the constant matrices built
//! from them: the derivative-coupling matrix M, the boundary vectors L(D),
//! L(0) and the orthogonality weight matrix Q.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LegendreBlock {
    /// Number of projections.
    pub l: usize,
    pub delay: f64,
    /// Strictly lower triangular: M[k][i] = (2i+1)(1 - (-1)^{k+i}) for i < k.
    pub m: Matrix,
    /// L(D) = (1, 1, ..., 1).
    pub ld: Matrix,
    /// L(0) = (1, -1, 1, -1, ...).
    pub l0: Matrix,
    /// diag(1, 3, 5, ..., 2l-1).
    pub q: Matrix,
}

/// L_k(zeta) = (-1)^k sum_i p_i^k (zeta/D)^i with
/// p_i^k = (-1)^i C(k,i) C(k+i,i); L_k(0) = (-1)^k, L_k(D) = 1.
pub fn legendre_eval(k: usize, zeta: f64, delay: f64) -> Result<f64> {
    if !(0.0..=delay).contains(&zeta) {
        return Err(Error::Domain(format!("zeta = {zeta} outside [0, {delay}]")));
    }
    let x = zeta / delay;
    let mut sum = 0.0;
    for i in 0..=k {
        sum += coeff(k, i) * x.powi(i as i32);
    }
    Ok(if k % 2 == 0 { sum } else { -sum })
}

/// p_i^k = (-1)^i C(k,i) C(k+i,i).
fn coeff(k: usize, i: usize) -> f64 {
    let c = binomial(k, i) * binomial(k + i, i);
    if i % 2 == 0 {
        c
    } else {
        -c
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for j in 0..k {
        r *= (n - j) as f64 / (j + 1) as f64;
    }
    r
}

/// Analytic derivative of the series, used only by tests of the derivative
/// identity.
pub fn legendre_eval_deriv(k: usize, zeta: f64, delay: f64) -> Result<f64> {
    if !(0.0..=delay).contains(&zeta) {
        return Err(Error::Domain(format!("zeta = {zeta} outside [0, {delay}]")));
    }
    let x = zeta / delay;
    let mut sum = 0.0;
    for i in 1..=k {
        sum += coeff(k, i) * i as f64 * x.powi(i as i32 - 1) / delay;
    }
    Ok(if k % 2 == 0 { sum } else { -sum })
}

pub fn build_legendre_block(l: usize, delay: f64) -> Result<LegendreBlock> {
    if l < 1 {
        return Err(Error::Domain(
            "at least one Legendre projection is required (l >= 1)".into(),
        ));
    }
    if !(delay > 0.0) {
        return Err(Error::Domain("delay must be positive".into()));
    }
    let mut m = Matrix::zeros(l, l);
    for k in 0..l {
        for i in 0..k {
            if (k + i) % 2 == 1 {
                m[(k, i)] = 2.0 * (2 * i + 1) as f64;
            }
        }
    }
    let ld = Matrix::column(&vec![1.0; l]);
    let l0 = Matrix::column(
        &(0..l)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect::<Vec<_>>(),
    );
    let q = Matrix::diag(&(0..l).map(|k| (2 * k + 1) as f64).collect::<Vec<_>>());
    Ok(LegendreBlock {
        l,
        delay,
        m,
        ld,
        l0,
        q,
    })
}

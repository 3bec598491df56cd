//! Structure-preserving finite-element approximation of the transport
//! equation: equidistant hat-function basis, mass/stiffness/input matrices,
//! initial-condition projection and spatial reconstruction.
//!
//! The discretization keeps the scattering structure of the transport
//! energy, so the approximated ODE is stable at every order N.

use crate::densela::{cholesky, solve_linear};
use crate::error::{Error, Result};
use crate::gauss;
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    /// Number of basis functions (nodes), N >= 2.
    pub n_basis: usize,
    /// Delay, seconds.
    pub delay: f64,
    /// Element length h = D/(N-1), computed once and reused everywhere.
    pub h: f64,
}

impl BasisConfig {
    pub fn new(n_basis: usize, delay: f64) -> Result<Self> {
        if n_basis < 2 {
            return Err(Error::Domain(
                "basis needs both endpoints: N must be >= 2".into(),
            ));
        }
        if !(delay > 0.0) || !delay.is_finite() {
            return Err(Error::Domain("delay D must be positive".into()));
        }
        let h = delay / (n_basis - 1) as f64;
        Ok(BasisConfig {
            n_basis,
            delay,
            h,
        })
    }

    pub fn elements(&self) -> usize {
        self.n_basis - 1
    }

    /// Node position j*h.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h
    }
}

#[derive(Debug, Clone)]
pub struct FemMatrices {
    /// Tridiagonal symmetric positive-definite mass matrix.
    pub e_d: Matrix,
    pub a_d: Matrix,
    /// phi(D): unit vector with 1 in the last entry.
    pub b_d: Matrix,
}

/// Evaluate the hat basis phi(zeta): nonnegative, at most two nonzero
/// entries, partition of unity.
pub fn hat_basis_eval(cfg: &BasisConfig, zeta: f64) -> Result<Vec<f64>> {
    if !(0.0..=cfg.delay).contains(&zeta) {
        return Err(Error::Domain(format!(
            "zeta = {zeta} outside [0, {}]",
            cfg.delay
        )));
    }
    let n = cfg.n_basis;
    let mut phi = vec![0.0; n];
    // element index containing zeta
    let e = ((zeta / cfg.h) as usize).min(n - 2);
    let left = cfg.node(e);
    let s = ((zeta - left) / cfg.h).clamp(0.0, 1.0);
    phi[e] = 1.0 - s;
    phi[e + 1] = s;
    Ok(phi)
}

/// Closed-form sparse matrices of the hat basis:
/// E_d tridiagonal (h/6)(2,4,...,4,2 diag; 1 off-diag),
/// A_d = (1/2) bidiagonal -1/+1 pattern with -1 corners,
/// B_d = e_N.
pub fn build_fem_matrices(cfg: &BasisConfig) -> FemMatrices {
    let n = cfg.n_basis;
    let h6 = cfg.h / 6.0;
    let mut e_d = Matrix::zeros(n, n);
    for i in 0..n {
        e_d[(i, i)] = if i == 0 || i == n - 1 { 2.0 * h6 } else { 4.0 * h6 };
        if i + 1 < n {
            e_d[(i, i + 1)] = h6;
            e_d[(i + 1, i)] = h6;
        }
    }
    let mut a_d = Matrix::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            a_d[(i, i + 1)] = 0.5;
        }
        if i >= 1 {
            a_d[(i, i - 1)] = -0.5;
        }
    }
    a_d[(0, 0)] = -0.5;
    a_d[(n - 1, n - 1)] = -0.5;
    let mut b_d = Matrix::zeros(n, 1);
    b_d[(n - 1, 0)] = 1.0;
    debug_assert!(cholesky(&e_d).is_some(), "mass matrix must be PD");
    FemMatrices { e_d, a_d, b_d }
}

/// Galerkin projection of the initial history u0 onto the basis:
/// u_d0 = E_d^{-1} * load vector, load by composite 8-point Gauss per element.
pub fn project_initial<F: Fn(f64) -> f64>(cfg: &BasisConfig, u0: F) -> Result<Vec<f64>> {
    let n = cfg.n_basis;
    let mut load = Matrix::zeros(n, 1);
    let (nodes, weights) = gauss::gauss_legendre(8);
    for e in 0..cfg.elements() {
        let a = cfg.node(e);
        let b = cfg.node(e + 1);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (&x, &w) in nodes.iter().zip(weights.iter()) {
            let zeta = mid + half * x;
            let s = (zeta - a) / cfg.h;
            let f = u0(zeta) * w * half;
            load[(e, 0)] += f * (1.0 - s);
            load[(e + 1, 0)] += f * s;
        }
    }
    let fem = build_fem_matrices(cfg);
    let ud0 = solve_linear(&fem.e_d, &load)?;
    Ok((0..n).map(|i| ud0[(i, 0)]).collect())
}

/// Pointwise reconstruction phi(zeta)^T u_d.
pub fn reconstruct(cfg: &BasisConfig, u_d: &[f64], zeta: f64) -> Result<f64> {
    if u_d.len() != cfg.n_basis {
        return Err(Error::Dimension(format!(
            "reconstruct: expected {} coefficients, got {}",
            cfg.n_basis,
            u_d.len()
        )));
    }
    let phi = hat_basis_eval(cfg, zeta)?;
    Ok(phi.iter().zip(u_d.iter()).map(|(p, u)| p * u).sum())
}

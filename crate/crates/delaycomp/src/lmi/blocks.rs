//! Assembly of the constant matrices entering the stability LMI, the affine
//! map (P, alpha) -> Lambda, and the independent certificate checker.

use crate::controller::{DynamicController, PlantModel};
use crate::densela::sym_eig;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

use super::legendre::build_legendre_block;

/// Constant data of one LMI instance.
#[derive(Debug, Clone)]
pub struct LmiBlocks {
    pub n: usize,
    pub n_basis: usize,
    pub l: usize,
    pub delay: f64,
    /// [K2, K1, 0] (1 x (n+N+l)).
    pub kbar: Matrix,
    /// Block matrix [A 0 0; B~d A~d 0; 0 0 -M/D].
    pub acal: Matrix,
    /// (0; 0; L(D)).
    pub b1: Matrix,
    /// (B; 0; -L(0)).
    pub b2: Matrix,
    /// Q in the lower-right l x l block.
    pub qbar: Matrix,
}

impl LmiBlocks {
    pub fn dim(&self) -> usize {
        self.n + self.n_basis + self.l
    }
}

pub fn assemble_blocks(plant: &PlantModel, ctrl: &DynamicController, l: usize) -> Result<LmiBlocks> {
    let n = plant.state_dim();
    let n_basis = ctrl.cfg.n_basis;
    if ctrl.b_tilde.cols() != n || ctrl.k2.cols() != n {
        return Err(Error::Assembly(format!(
            "controller was synthesized for state dimension {}, plant has {n}",
            ctrl.b_tilde.cols()
        )));
    }
    if (ctrl.cfg.delay - plant.delay).abs() > 1e-12 {
        return Err(Error::Assembly(
            "controller and plant delays differ".into(),
        ));
    }
    let lb = build_legendre_block(l, plant.delay)?;
    let s = n + n_basis + l;

    let mut kbar = Matrix::zeros(1, s);
    kbar.set_block(0, 0, &ctrl.k2);
    kbar.set_block(0, n, &ctrl.k1);

    let mut acal = Matrix::zeros(s, s);
    acal.set_block(0, 0, &plant.a);
    acal.set_block(n, 0, &ctrl.b_tilde);
    acal.set_block(n, n, &ctrl.a_tilde);
    acal.set_block(n + n_basis, n + n_basis, &lb.m.scale(-1.0 / plant.delay));

    let mut b1 = Matrix::zeros(s, 1);
    b1.set_block(n + n_basis, 0, &lb.ld);

    let mut b2 = Matrix::zeros(s, 1);
    b2.set_block(0, 0, &plant.b);
    b2.set_block(n + n_basis, 0, &lb.l0.scale(-1.0));

    let mut qbar = Matrix::zeros(s, s);
    qbar.set_block(n + n_basis, n + n_basis, &lb.q);

    Ok(LmiBlocks {
        n,
        n_basis,
        l,
        delay: plant.delay,
        kbar,
        acal,
        b1,
        b2,
        qbar,
    })
}

/// The affine LMI map:
/// Psi = Acal^T P + P Acal + alpha (1+D) Kbar^T Kbar - (alpha/D) Qbar
///       + P B1 Kbar + Kbar^T B1^T P,
/// Lambda = [[Psi, P B2], [B2^T P, -alpha]].
pub fn lambda_operator(blocks: &LmiBlocks, p: &Matrix, alpha: f64) -> Result<Matrix> {
    let s = blocks.dim();
    if p.rows() != s || p.cols() != s {
        return Err(Error::Assembly(format!(
            "P must be {s}x{s}, got {}x{}",
            p.rows(),
            p.cols()
        )));
    }
    let d = blocks.delay;
    let ktk = &blocks.kbar.transpose() * &blocks.kbar;
    let pb1k = &(p * &blocks.b1) * &blocks.kbar;
    let psi = &(&(&(&blocks.acal.transpose() * p) + &(p * &blocks.acal))
        + &(&ktk.scale(alpha * (1.0 + d)) - &blocks.qbar.scale(alpha / d)))
        + &(&pb1k + &pb1k.transpose());
    let pb2 = p * &blocks.b2;

    let mut lambda = Matrix::zeros(s + 1, s + 1);
    lambda.set_block(0, 0, &psi);
    lambda.set_block(0, s, &pb2);
    lambda.set_block(s, 0, &pb2.transpose());
    lambda[(s, s)] = -alpha;
    Ok(lambda)
}

/// Margins of Theorem-style certificate conditions, computed independently
/// of any solver via the Jacobi eigensolver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertMargins {
    pub lambda_min_p: f64,
    pub lambda_max_lambda: f64,
    pub alpha: f64,
}

impl CertMargins {
    /// P > tol, alpha > tol, Lambda < -tol.
    pub fn passes(&self, tol: f64) -> bool {
        self.lambda_min_p > tol && self.alpha > tol && self.lambda_max_lambda < -tol
    }
}

/// A verified stability certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub p: Matrix,
    pub alpha: f64,
    pub margins: CertMargins,
    pub n: usize,
    pub n_basis: usize,
    pub l: usize,
}

/// Recompute the three margins for a candidate (P, alpha).
pub fn check_certificate(blocks: &LmiBlocks, p: &Matrix, alpha: f64) -> Result<CertMargins> {
    let lambda = lambda_operator(blocks, p, alpha)?;
    let p_eig = sym_eig(p)?;
    let l_eig = sym_eig(&lambda)?;
    Ok(CertMargins {
        lambda_min_p: p_eig.eigenvalues[0],
        lambda_max_lambda: *l_eig.eigenvalues.last().unwrap(),
        alpha,
    })
}

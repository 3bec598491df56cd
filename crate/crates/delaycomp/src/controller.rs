//! Synthesis of the dynamic controller approximating the predictor-feedback
//! law: exact K1 integral via Van Loan moments per element, K2 = K e^{AD},
//! the controller matrices A~d, B~d, and the reference feedforward H.

use crate::densela::{
    expm_moment_integrals, is_controllable, is_hurwitz, mat_exp, max_real_part, solve_linear,
};
use crate::error::{Error, Result};
use crate::fem::{build_fem_matrices, BasisConfig};
use crate::gauss;
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// Strictness required of A + BK (and used by the certificate premise).
pub const HURWITZ_TOL: f64 = 1e-9;

/// Single-input plant with constant input delay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub delay: f64,
}

impl PlantModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, delay: f64) -> Result<Self> {
        a.check_square("plant A")?;
        a.check_finite("plant A")?;
        let n = a.rows();
        if b.rows() != n || b.cols() != 1 {
            return Err(Error::Dimension(format!("plant B must be {n}x1")));
        }
        if c.rows() != 1 || c.cols() != n {
            return Err(Error::Dimension(format!("plant C must be 1x{n}")));
        }
        if !(delay > 0.0) || !delay.is_finite() {
            return Err(Error::Domain("plant delay D must be positive".into()));
        }
        if !is_controllable(&a, &b) {
            return Err(Error::Controllability);
        }
        Ok(PlantModel { a, b, c, delay })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }
}

/// The synthesized dynamic controller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicController {
    pub a_tilde: Matrix,
    pub b_tilde: Matrix,
    pub k1: Matrix,
    pub k2: Matrix,
    /// Reference feedforward gain.
    pub h_ff: f64,
    pub cfg: BasisConfig,
    /// Nominal undelayed gain K.
    pub k: Matrix,
}

/// Build the order-N dynamic controller for the given nominal gain. Rejects
/// gains that do not make A + BK strictly Hurwitz.
pub fn synth_controller(plant: &PlantModel, k: &Matrix, n_basis: usize) -> Result<DynamicController> {
    let closed = &plant.a + &(&plant.b * k);
    if !is_hurwitz(&closed, HURWITZ_TOL)? {
        return Err(Error::Design(format!(
            "A + BK is not Hurwitz (max Re = {:.3e})",
            max_real_part(&closed)?
        )));
    }
    synth_controller_unchecked(plant, k, n_basis)
}

/// Same synthesis without the Hurwitz premise check. Exists so that
/// deliberately destabilized loops can still be assembled and fed to the
/// certificate machinery and the simulator.
pub fn synth_controller_unchecked(
    plant: &PlantModel,
    k: &Matrix,
    n_basis: usize,
) -> Result<DynamicController> {
    let n = plant.state_dim();
    if k.rows() != 1 || k.cols() != n {
        return Err(Error::Dimension(format!("gain K must be 1x{n}")));
    }
    let cfg = BasisConfig::new(n_basis, plant.delay)?;
    let fem = build_fem_matrices(&cfg);

    let k2 = k * &mat_exp(&plant.a, plant.delay)?;
    let k1 = k1_exact(plant, k, &cfg)?;

    // E_d A~d = A_d + B_d K1, E_d B~d = B_d K2
    let a_tilde = solve_linear(&fem.e_d, &(&fem.a_d + &(&fem.b_d * &k1)))?;
    let b_tilde = solve_linear(&fem.e_d, &(&fem.b_d * &k2))?;

    let h_ff = feedforward_gain(plant, k)?;

    Ok(DynamicController {
        a_tilde,
        b_tilde,
        k1,
        k2,
        h_ff,
        cfg,
        k: k.clone(),
    })
}

/// K1 = int_0^D K e^{A(D-zeta)} B phi^T(zeta) dzeta, evaluated exactly.
///
/// On element [eh, (e+1)h] substitute s = D - zeta; the two hat functions
/// become sigma/h and (h-sigma)/h in the local variable sigma, so each entry
/// is K e^{A s0} (G2/h) B resp. K e^{A s0} (G1 - G2/h) B with s0 the element
/// offset and (F, G1, G2) the Van Loan moment integrals on one element.
fn k1_exact(plant: &PlantModel, k: &Matrix, cfg: &BasisConfig) -> Result<Matrix> {
    let n_basis = cfg.n_basis;
    let (f, g1, g2) = expm_moment_integrals(&plant.a, cfg.h)?;
    let g2h = g2.scale(1.0 / cfg.h);
    let g1_minus = &g1 - &g2h;

    let mut k1 = Matrix::zeros(1, n_basis);
    // v_e = K e^{A (N-2-e) h}, built by repeated right-multiplication with F
    let mut v = k.clone(); // element e = N-2 has s0 = 0
    for e in (0..cfg.elements()).rev() {
        let left = (&(&v * &g2h) * &plant.b).as_scalar();
        let right = (&(&v * &g1_minus) * &plant.b).as_scalar();
        k1[(0, e)] += left;
        k1[(0, e + 1)] += right;
        v = &v * &f;
    }
    Ok(k1)
}

/// H = -(C (A+BK)^{-1} B)^{-1}: unity DC gain from reference to y = CX for
/// the undelayed nominal loop.
pub fn feedforward_gain(plant: &PlantModel, k: &Matrix) -> Result<f64> {
    let closed = &plant.a + &(&plant.b * k);
    let x = solve_linear(&closed, &plant.b)?;
    let dc = (&plant.c * &x).as_scalar();
    if dc.abs() < 1e-12 {
        return Err(Error::Feedforward);
    }
    Ok(-1.0 / dc)
}

/// Quadrature weights for the ideal predictor integral over an equispaced
/// input-history grid: U = weights . u_samples + K2 X.
///
/// The kernel K e^{A(D-zeta)} B is evaluated exactly at the Gauss nodes of
/// every grid cell; the history is taken piecewise linear between samples.
#[derive(Debug, Clone)]
pub struct PredictorWeights {
    pub weights: Vec<f64>,
    /// Per-cell (lower-node, upper-node) weights; node weights are their
    /// telescoped sums. Kept separate so callers with one-sided history
    /// values at jump samples can integrate cell by cell.
    pub cell_weights: Vec<(f64, f64)>,
    pub k2: Matrix,
    pub cells: usize,
    pub dt: f64,
}

impl PredictorWeights {
    pub fn new(plant: &PlantModel, k: &Matrix, cells: usize, gauss_pts: usize) -> Result<Self> {
        if cells < 1 {
            return Err(Error::Domain("predictor needs at least one cell".into()));
        }
        let dt = plant.delay / cells as f64;
        let k2 = k * &mat_exp(&plant.a, plant.delay)?;
        let f = mat_exp(&plant.a, dt)?;
        let (nodes, wts) = gauss::gauss_legendre(gauss_pts);
        // per Gauss node: b_g = e^{A (1-g) dt} B with g in (0,1)
        let gb: Vec<(f64, f64, Matrix)> = nodes
            .iter()
            .zip(wts.iter())
            .map(|(&x, &w)| {
                let g = 0.5 * (x + 1.0);
                let bg = &mat_exp(&plant.a, (1.0 - g) * dt).unwrap() * &plant.b;
                (g, w, bg)
            })
            .collect();

        let mut weights = vec![0.0; cells + 1];
        let mut cell_weights = vec![(0.0, 0.0); cells];
        // v_j = K e^{A (cells-1-j) dt}
        let mut v = k.clone(); // j = cells-1
        for j in (0..cells).rev() {
            for (g, w, bg) in &gb {
                let kappa = (&v * bg).as_scalar();
                let contrib = 0.5 * dt * w * kappa;
                weights[j] += contrib * (1.0 - g);
                weights[j + 1] += contrib * g;
                cell_weights[j].0 += contrib * (1.0 - g);
                cell_weights[j].1 += contrib * g;
            }
            v = &v * &f;
        }
        Ok(PredictorWeights {
            weights,
            cell_weights,
            k2,
            cells,
            dt,
        })
    }

    /// Ideal control value for state `x` and history samples u(zeta_j, t) on
    /// the grid (length cells + 1, left endpoint zeta = 0).
    pub fn eval(&self, x: &Matrix, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.cells + 1 {
            return Err(Error::History(format!(
                "expected {} samples, got {}",
                self.cells + 1,
                samples.len()
            )));
        }
        let integral: f64 = self
            .weights
            .iter()
            .zip(samples.iter())
            .map(|(w, s)| w * s)
            .sum();
        Ok(integral + (&self.k2 * x).as_scalar())
    }
}

/// One-shot ideal predictor evaluation against an equispaced history
/// covering [t-D, t] (samples[0] = u(0,t) = U(t-D), last = u(D,t) = U(t)).
pub fn exact_predictor_input(
    plant: &PlantModel,
    k: &Matrix,
    x: &Matrix,
    samples: &[f64],
    gauss_pts: usize,
) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::History(
            "history must cover [t-D, t] with at least two samples".into(),
        ));
    }
    let pw = PredictorWeights::new(plant, k, samples.len() - 1, gauss_pts)?;
    pw.eval(x, samples)
}

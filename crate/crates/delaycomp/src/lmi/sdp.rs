//! Log-barrier interior-point feasibility solver for the stability LMI.
//!
//! The problem is posed as margin maximization: max t subject to
//!   P - tI  >  0,   alpha - t > 0,   -Lambda(P, alpha) - tI  >  0,
//! together with box bounds P < rho I and alpha < rho that keep the central
//! path well defined (the raw feasible set is a cone and unbounded).
//! A candidate is only ever returned after the independent eigenvalue
//! checker passes on the unscaled blocks; `NotFound` means "no certificate
//! within budget", not an infeasibility proof.

use crate::densela::{cholesky, solve_linear, sym_eig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::blocks::{check_certificate, CertMargins, Certificate, LmiBlocks};

#[derive(Debug, Clone, Copy)]
pub struct FeasOptions {
    pub max_iter: usize,
    /// Relative margin below which the outcome is NotFound.
    pub tol: f64,
    /// Diagonal pre-scaling of the blocks before solving.
    pub scaling: bool,
}

impl Default for FeasOptions {
    fn default() -> Self {
        FeasOptions {
            max_iter: 2000,
            tol: 1e-9,
            scaling: true,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FeasOutcome {
    Found(Certificate),
    /// Best (relative) margin reached within budget; not an infeasibility
    /// proof.
    NotFound { margin: f64 },
}

/// Upper box bound on the scaled P and alpha.
const RHO: f64 = 1e4;

pub fn solve_feasibility(blocks: &LmiBlocks, opts: &FeasOptions) -> Result<FeasOutcome> {
    let (scaled, d) = if opts.scaling {
        scale_blocks(blocks)
    } else {
        (blocks.clone(), vec![1.0; blocks.dim()])
    };
    let s = scaled.dim();
    let m_p = s * (s + 1) / 2;
    let m = m_p + 2; // vech(P), alpha, t

    let cones = build_cones(&scaled, m_p);

    // strictly feasible start: P = I, alpha = 1, t below every margin
    let mut x = vec![0.0; m];
    for p in 0..s {
        x[vech_index(p, p, s)] = 1.0;
    }
    x[m_p] = 1.0;
    let lam0 = super::blocks::lambda_operator(&scaled, &Matrix::identity(s), 1.0)?;
    let lam0_max = *sym_eig(&lam0)?.eigenvalues.last().unwrap();
    x[m_p + 1] = (-lam0_max).min(1.0) - 1.0;

    let mut best_margin = f64::NEG_INFINITY;
    let mut mu = 10.0f64;
    let mut newton_budget = opts.max_iter;

    while mu > 1e-9 && newton_budget > 0 {
        // centering for the current mu
        let mut inner = 0;
        loop {
            let (g, h) = barrier_grad_hess(&cones, &x, m, m_p, mu)?;
            let dir = newton_direction(&h, &g)?;
            let decrement: f64 = -g.iter().zip(dir.iter()).map(|(a, b)| a * b).sum::<f64>();
            if !decrement.is_finite() {
                return Err(Error::Solver("Newton direction diverged".into()));
            }
            if decrement < 1e-9 || inner >= 40 || newton_budget == 0 {
                break;
            }
            let f0 = barrier_value(&cones, &x, m_p, mu)
                .ok_or_else(|| Error::Solver("iterate left the feasible region".into()))?;
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let xt: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + step * b).collect();
                if let Some(ft) = barrier_value(&cones, &xt, m_p, mu) {
                    if ft <= f0 - 0.25 * step * decrement {
                        x = xt;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.6;
            }
            if !accepted {
                break;
            }
            inner += 1;
            newton_budget = newton_budget.saturating_sub(1);
        }

        // candidate extraction on the original blocks
        let (p_orig, alpha) = unpack_candidate(&x, s, m_p, &d);
        if let Some(outcome) = try_certify(blocks, &p_orig, alpha, opts.tol)? {
            match outcome {
                CandidateVerdict::Verified(cert) => return Ok(FeasOutcome::Found(cert)),
                CandidateVerdict::Margin(rel) => best_margin = best_margin.max(rel),
            }
        }
        mu *= 0.15;
    }

    Ok(FeasOutcome::NotFound {
        margin: if best_margin.is_finite() {
            best_margin
        } else {
            f64::NEG_INFINITY
        },
    })
}

enum CandidateVerdict {
    Verified(Certificate),
    Margin(f64),
}

/// Normalize a candidate, check it with the independent eigenvalue checker
/// and wrap it into a certificate when the relative margin clears `tol`.
fn try_certify(
    blocks: &LmiBlocks,
    p: &Matrix,
    alpha: f64,
    tol: f64,
) -> Result<Option<CandidateVerdict>> {
    if !p.is_finite() || !alpha.is_finite() {
        return Ok(None);
    }
    // normalize so the larger of lambda_max(P) and alpha is one
    let p_eig = sym_eig(p)?;
    let p_max = p_eig.eigenvalues.last().unwrap().abs();
    let scale = p_max.max(alpha.abs());
    if scale <= 0.0 {
        return Ok(None);
    }
    let c = 1.0 / scale;
    let p_n = p.scale(c);
    let alpha_n = alpha * c;
    let margins = check_certificate(blocks, &p_n, alpha_n)?;
    let rel = margins
        .lambda_min_p
        .min(alpha_n)
        .min(-margins.lambda_max_lambda);
    if margins.passes(tol) {
        // rescale once more so the absolute margins are comfortably above
        // the audit threshold
        let boost = (1.0 / rel).clamp(1.0, 1e6);
        let p_f = p_n.scale(boost);
        let alpha_f = alpha_n * boost;
        let margins_f = check_certificate(blocks, &p_f, alpha_f)?;
        if margins_f.passes(1e-8) {
            return Ok(Some(CandidateVerdict::Verified(Certificate {
                p: p_f,
                alpha: alpha_f,
                margins: margins_f,
                n: blocks.n,
                n_basis: blocks.n_basis,
                l: blocks.l,
            })));
        }
    }
    Ok(Some(CandidateVerdict::Margin(rel)))
}

// ---------------------------------------------------------------------------
// cone machinery

/// One affine matrix-cone constraint S(x) = c0 + sum_i x_i grad_i > 0.
struct Cone {
    c0: Matrix,
    grads: Vec<Option<Matrix>>,
}

fn vech_index(p: usize, q: usize, s: usize) -> usize {
    // upper triangle (p <= q), row-major
    debug_assert!(p <= q && q < s);
    p * s - p * (p + 1) / 2 + q
}

/// Symmetric basis matrix E_pq (unit entries at (p,q) and (q,p)).
fn basis_sym(p: usize, q: usize, s: usize) -> Matrix {
    let mut e = Matrix::zeros(s, s);
    e[(p, q)] = 1.0;
    e[(q, p)] = 1.0;
    e
}

fn build_cones(blocks: &LmiBlocks, m_p: usize) -> Vec<Cone> {
    let s = blocks.dim();
    let m = m_p + 2;
    let d = blocks.delay;
    // closed coupling matrix entering Psi: Abar = Acal + B1 Kbar
    let abar = &blocks.acal + &(&blocks.b1 * &blocks.kbar);
    let ktk = &blocks.kbar.transpose() * &blocks.kbar;

    // cone 1: P - tI > 0
    let mut g1: Vec<Option<Matrix>> = vec![None; m];
    // cone 2: RHO I - P > 0
    let mut g2: Vec<Option<Matrix>> = vec![None; m];
    // cone 3: -Lambda(P, alpha) - tI > 0
    let mut g3: Vec<Option<Matrix>> = vec![None; m];

    for p in 0..s {
        for q in p..s {
            let i = vech_index(p, q, s);
            let e = basis_sym(p, q, s);
            g1[i] = Some(e.clone());
            g2[i] = Some(e.scale(-1.0));
            // Lambda restricted to P: [[Abar^T E + E Abar, E B2], [B2^T E, 0]]
            let top = &(&abar.transpose() * &e) + &(&e * &abar);
            let eb2 = &e * &blocks.b2;
            let mut lam_p = Matrix::zeros(s + 1, s + 1);
            lam_p.set_block(0, 0, &top);
            lam_p.set_block(0, s, &eb2);
            lam_p.set_block(s, 0, &eb2.transpose());
            g3[i] = Some(lam_p.scale(-1.0));
        }
    }
    // alpha direction of Lambda: [[(1+D) K^T K - Qbar/D, 0], [0, -1]]
    let mut lam_a = Matrix::zeros(s + 1, s + 1);
    lam_a.set_block(0, 0, &(&ktk.scale(1.0 + d) - &blocks.qbar.scale(1.0 / d)));
    lam_a[(s, s)] = -1.0;
    g3[m_p] = Some(lam_a.scale(-1.0));
    g1[m_p + 1] = Some(Matrix::identity(s).scale(-1.0));
    g3[m_p + 1] = Some(Matrix::identity(s + 1).scale(-1.0));

    // scalar cones: alpha - t > 0, RHO - alpha > 0
    let mut g4: Vec<Option<Matrix>> = vec![None; m];
    g4[m_p] = Some(Matrix::scalar(1.0));
    g4[m_p + 1] = Some(Matrix::scalar(-1.0));
    let mut g5: Vec<Option<Matrix>> = vec![None; m];
    g5[m_p] = Some(Matrix::scalar(-1.0));

    vec![
        Cone {
            c0: Matrix::zeros(s, s),
            grads: g1,
        },
        Cone {
            c0: Matrix::identity(s).scale(RHO),
            grads: g2,
        },
        Cone {
            c0: Matrix::zeros(s + 1, s + 1),
            grads: g3,
        },
        Cone {
            c0: Matrix::scalar(0.0),
            grads: g4,
        },
        Cone {
            c0: Matrix::scalar(RHO),
            grads: g5,
        },
    ]
}

fn cone_matrix(cone: &Cone, x: &[f64]) -> Matrix {
    let mut s = cone.c0.clone();
    for (xi, gi) in x.iter().zip(cone.grads.iter()) {
        if let Some(g) = gi {
            if *xi != 0.0 {
                let scaled = g.scale(*xi);
                s = &s + &scaled;
            }
        }
    }
    s
}

/// -t/mu - sum log det S_c, or None when infeasible.
fn barrier_value(cones: &[Cone], x: &[f64], m_p: usize, mu: f64) -> Option<f64> {
    let mut f = -x[m_p + 1] / mu;
    for cone in cones {
        let s = cone_matrix(cone, x);
        let l = cholesky(&s)?;
        let mut logdet = 0.0;
        for i in 0..l.rows() {
            logdet += l[(i, i)].ln();
        }
        f -= 2.0 * logdet;
    }
    Some(f)
}

fn barrier_grad_hess(
    cones: &[Cone],
    x: &[f64],
    m: usize,
    m_p: usize,
    mu: f64,
) -> Result<(Vec<f64>, Matrix)> {
    let mut g = vec![0.0; m];
    g[m_p + 1] = -1.0 / mu;
    let mut h = Matrix::zeros(m, m);
    for cone in cones {
        let s = cone_matrix(cone, x);
        let sinv = solve_linear(&s, &Matrix::identity(s.rows()))
            .map_err(|_| Error::Solver("cone matrix became singular".into()))?;
        let active: Vec<usize> = (0..m).filter(|&i| cone.grads[i].is_some()).collect();
        let t_mats: Vec<(usize, Matrix)> = active
            .iter()
            .map(|&i| {
                let c = cone.grads[i].as_ref().unwrap();
                (i, &(&sinv * c) * &sinv)
            })
            .collect();
        for &i in &active {
            g[i] -= sinv.dot(cone.grads[i].as_ref().unwrap());
        }
        for (i, ti) in &t_mats {
            for &j in &active {
                if j < *i {
                    continue;
                }
                let v = ti.dot(cone.grads[j].as_ref().unwrap());
                h[(*i, j)] += v;
                if *i != j {
                    h[(j, *i)] += v;
                }
            }
        }
    }
    Ok((g, h))
}

fn newton_direction(h: &Matrix, g: &[f64]) -> Result<Vec<f64>> {
    let m = g.len();
    let rhs = Matrix::column(&g.iter().map(|v| -v).collect::<Vec<_>>());
    // ridge fallback for near-singular Hessians
    let mut ridge = 0.0;
    for _ in 0..8 {
        let hr = if ridge == 0.0 {
            h.clone()
        } else {
            &h.clone() + &Matrix::identity(m).scale(ridge)
        };
        if let Ok(dir) = solve_linear(&hr, &rhs) {
            let v: Vec<f64> = (0..m).map(|i| dir[(i, 0)]).collect();
            if v.iter().all(|x| x.is_finite()) {
                return Ok(v);
            }
        }
        ridge = if ridge == 0.0 { 1e-10 * h.max_abs().max(1.0) } else { ridge * 100.0 };
    }
    Err(Error::Solver("Newton system unsolvable".into()))
}

fn unpack_candidate(x: &[f64], s: usize, m_p: usize, d: &[f64]) -> (Matrix, f64) {
    let mut p = Matrix::zeros(s, s);
    for i in 0..s {
        for j in i..s {
            let v = x[vech_index(i, j, s)];
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    // undo the diagonal scaling: P_orig = D^{-1} P~ D^{-1}
    for i in 0..s {
        for j in 0..s {
            p[(i, j)] /= d[i] * d[j];
        }
    }
    (p, x[m_p])
}

/// Diagonal similarity scaling (powers of two) balancing the augmented
/// matrix [[Abar, B2], [Kbar, 0]]; the extra coordinate is not scaled.
fn scale_blocks(blocks: &LmiBlocks) -> (LmiBlocks, Vec<f64>) {
    let s = blocks.dim();
    let abar = &blocks.acal + &(&blocks.b1 * &blocks.kbar);
    let mut aug = Matrix::zeros(s + 1, s + 1);
    aug.set_block(0, 0, &abar);
    aug.set_block(0, s, &blocks.b2);
    aug.set_block(s, 0, &blocks.kbar);

    let mut d = vec![1.0f64; s];
    for _ in 0..20 {
        let mut changed = false;
        for i in 0..s {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..=s {
                if j != i {
                    r += (aug[(i, j)] * scale_of(&d, j, s)).abs() / d[i];
                    c += (aug[(j, i)] * d[i]).abs() / scale_of(&d, j, s);
                }
            }
            if r == 0.0 || c == 0.0 {
                continue;
            }
            let f = (r / c).sqrt();
            let f2 = 2.0f64.powi(f.log2().round() as i32);
            if f2 != 1.0 && f2.is_finite() && f2 > 0.0 && (d[i] * f2).is_finite() {
                d[i] *= f2;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let dm = Matrix::diag(&d);
    let dinv = Matrix::diag(&d.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
    let scaled = LmiBlocks {
        n: blocks.n,
        n_basis: blocks.n_basis,
        l: blocks.l,
        delay: blocks.delay,
        kbar: &blocks.kbar * &dm,
        acal: &(&dinv * &blocks.acal) * &dm,
        b1: &dinv * &blocks.b1,
        b2: &dinv * &blocks.b2,
        qbar: &(&dm * &blocks.qbar) * &dm,
    };
    (scaled, d)
}

fn scale_of(d: &[f64], j: usize, s: usize) -> f64 {
    if j < s {
        d[j]
    } else {
        1.0
    }
}

/// Per-l outcome of the minimal-l sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub l: usize,
    pub feasible: bool,
    pub margin: f64,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct MinLReport {
    pub entries: Vec<SweepEntry>,
    pub first_feasible: Option<usize>,
    pub certificate: Option<Certificate>,
}

/// Run the feasibility solver for l = 1..=l_max in order and report the
/// smallest feasible l. Solver errors are recorded per l without aborting
/// the sweep. `threads` > 1 fans the independent solves out.
pub fn find_min_l(
    plant: &crate::controller::PlantModel,
    ctrl: &crate::controller::DynamicController,
    l_max: usize,
    opts: &FeasOptions,
    threads: usize,
) -> Result<MinLReport> {
    if l_max < 1 {
        return Err(Error::Domain("l_max must be >= 1".into()));
    }
    let ls: Vec<usize> = (1..=l_max).collect();
    let solve_one = |l: usize| -> SweepEntry {
        match assemble_blocks_and_solve(plant, ctrl, l, opts) {
            Ok((feasible, margin, _)) => SweepEntry {
                l,
                feasible,
                margin,
                error: None,
            },
            Err(e) => SweepEntry {
                l,
                feasible: false,
                margin: f64::NEG_INFINITY,
                error: Some(e.to_string()),
            },
        }
    };

    let mut entries: Vec<SweepEntry> = Vec::with_capacity(l_max);
    if threads > 1 {
        for chunk in ls.chunks(threads) {
            let results: Vec<SweepEntry> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&l| scope.spawn(move || solve_one(l)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            entries.extend(results);
        }
    } else {
        entries.extend(ls.iter().map(|&l| solve_one(l)));
    }

    let first_feasible = entries.iter().find(|e| e.feasible).map(|e| e.l);
    let certificate = match first_feasible {
        Some(l) => match assemble_blocks_and_solve(plant, ctrl, l, opts) {
            Ok((_, _, cert)) => cert,
            Err(_) => None,
        },
        None => None,
    };
    Ok(MinLReport {
        entries,
        first_feasible,
        certificate,
    })
}

fn assemble_blocks_and_solve(
    plant: &crate::controller::PlantModel,
    ctrl: &crate::controller::DynamicController,
    l: usize,
    opts: &FeasOptions,
) -> Result<(bool, f64, Option<Certificate>)> {
    let blocks = super::blocks::assemble_blocks(plant, ctrl, l)?;
    match solve_feasibility(&blocks, opts)? {
        FeasOutcome::Found(cert) => {
            let margin = cert
                .margins
                .lambda_min_p
                .min(cert.alpha)
                .min(-cert.margins.lambda_max_lambda);
            Ok((true, margin, Some(cert)))
        }
        FeasOutcome::NotFound { margin } => Ok((false, margin, None)),
    }
}

/// Convenience margin accessor.
pub fn certificate_min_margin(m: &CertMargins) -> f64 {
    m.lambda_min_p.min(m.alpha).min(-m.lambda_max_lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{synth_controller, PlantModel};
    use crate::lmi::blocks::assemble_blocks;

    fn example1(n_basis: usize) -> (PlantModel, crate::controller::DynamicController) {
        let plant = PlantModel::new(
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            1.0,
        )
        .unwrap();
        let ctrl = synth_controller(&plant, &Matrix::row(&[-2.0]), n_basis).unwrap();
        (plant, ctrl)
    }

    #[test]
    fn example1_l4_feasible() {
        let (plant, ctrl) = example1(2);
        let blocks = assemble_blocks(&plant, &ctrl, 4).unwrap();
        match solve_feasibility(&blocks, &FeasOptions::default()).unwrap() {
            FeasOutcome::Found(cert) => {
                // audit the certificate independently of the solver
                let m = check_certificate(&blocks, &cert.p, cert.alpha).unwrap();
                assert!(m.passes(1e-8), "margins {m:?}");
            }
            FeasOutcome::NotFound { margin } => panic!("infeasible, margin {margin}"),
        }
    }

    #[test]
    fn example1_l1_infeasible() {
        let (plant, ctrl) = example1(2);
        let blocks = assemble_blocks(&plant, &ctrl, 1).unwrap();
        match solve_feasibility(&blocks, &FeasOptions::default()).unwrap() {
            FeasOutcome::Found(cert) => panic!("unexpected certificate at l=1: {:?}", cert.margins),
            FeasOutcome::NotFound { margin } => assert!(margin < 1e-7),
        }
    }

    #[test]
    fn min_l_sweep_example1() {
        let (plant, ctrl) = example1(2);
        let report = find_min_l(&plant, &ctrl, 5, &FeasOptions::default(), 1).unwrap();
        assert_eq!(report.entries.len(), 5);
        assert_eq!(report.first_feasible, Some(4));
        assert!(report.certificate.is_some());
        for e in &report.entries {
            assert_eq!(e.feasible, e.l >= 4, "l = {}", e.l);
        }
    }

    #[test]
    fn scaling_does_not_change_verdict() {
        let (plant, ctrl) = example1(3);
        let blocks = assemble_blocks(&plant, &ctrl, 4).unwrap();
        let unscaled = FeasOptions {
            scaling: false,
            ..FeasOptions::default()
        };
        let a = matches!(
            solve_feasibility(&blocks, &FeasOptions::default()).unwrap(),
            FeasOutcome::Found(_)
        );
        let b = matches!(
            solve_feasibility(&blocks, &unscaled).unwrap(),
            FeasOutcome::Found(_)
        );
        assert_eq!(a, b);
        assert!(a);
    }
}

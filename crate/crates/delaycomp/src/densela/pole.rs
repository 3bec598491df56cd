//! Single-input pole placement by Ackermann's formula, on the real
//! characteristic polynomial so complex pole sets never force complex
//! arithmetic.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::lu::LuFactors;
use super::schur::eigenvalues;

/// Gain row K such that eig(A + B K) equals `poles`. Poles are (re, im)
/// pairs and must be closed under conjugation.
pub fn pole_place_siso(a: &Matrix, b: &Matrix, poles: &[(f64, f64)]) -> Result<Matrix> {
    a.check_square("pole_place_siso")?;
    let n = a.rows();
    if b.rows() != n || b.cols() != 1 {
        return Err(Error::Dimension(format!(
            "pole_place_siso: B must be {n}x1"
        )));
    }
    if poles.len() != n {
        return Err(Error::Domain(format!(
            "pole_place_siso: expected {n} poles, got {}",
            poles.len()
        )));
    }
    let coeffs = real_char_poly(poles)?;

    let ctrb = controllability_matrix(a, b);
    if rank(&ctrb) < n {
        return Err(Error::Controllability);
    }

    // chi(A) = A^n + c_{n-1} A^{n-1} + ... + c_0 I  (Horner on matrices)
    let mut chi = Matrix::identity(n);
    for k in (0..n).rev() {
        chi = &(&chi * a) + &Matrix::identity(n).scale(coeffs[k]);
    }

    // Ackermann: K = -e_n^T Ctrb^{-1} chi(A)
    let lu = LuFactors::factor(&ctrb)?;
    let mut en = Matrix::zeros(n, 1);
    en[(n - 1, 0)] = 1.0;
    // row = e_n^T Ctrb^{-1}  <=>  Ctrb^T row^T = e_n
    let rowt = LuFactors::factor(&ctrb.transpose())?.solve(&en);
    let k = (&rowt.transpose() * &chi).scale(-1.0);
    let _ = lu;

    // verify the assignment
    let closed = &(a + &(b * &k)) * &Matrix::identity(n);
    let got = eigenvalues(&closed)?;
    for p in poles {
        let d = got
            .iter()
            .map(|g| ((g.0 - p.0).powi(2) + (g.1 - p.1).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        if d > 1e-6 {
            return Err(Error::Convergence(format!(
                "pole placement verification failed: pole ({}, {}) missed by {d:.2e}",
                p.0, p.1
            )));
        }
    }
    Ok(k)
}

/// [B AB ... A^{n-1}B].
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.rows();
    let mut ctrb = Matrix::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        ctrb.set_block(0, j, &col);
        col = a * &col;
    }
    ctrb
}

/// Controllability test for single-input pairs (rank of the controllability
/// matrix, via full pivoting).
pub fn is_controllable(a: &Matrix, b: &Matrix) -> bool {
    rank(&controllability_matrix(a, b)) == a.rows()
}

/// Monic characteristic polynomial with the given roots, as ascending real
/// coefficients c_0..c_{n-1} (the leading 1 is implicit). Errors unless the
/// root set is closed under conjugation.
fn real_char_poly(poles: &[(f64, f64)]) -> Result<Vec<f64>> {
    // pair complex roots with their conjugates
    let mut remaining: Vec<(f64, f64)> = poles.to_vec();
    let mut factors: Vec<Vec<f64>> = Vec::new(); // ascending coefficients
    while let Some(p) = remaining.pop() {
        if p.1.abs() < 1e-12 {
            factors.push(vec![-p.0, 1.0]);
        } else {
            let conj = remaining
                .iter()
                .position(|q| (q.0 - p.0).abs() < 1e-9 && (q.1 + p.1).abs() < 1e-9);
            match conj {
                Some(i) => {
                    remaining.swap_remove(i);
                    // (s - p)(s - conj p) = s^2 - 2 Re(p) s + |p|^2
                    factors.push(vec![p.0 * p.0 + p.1 * p.1, -2.0 * p.0, 1.0]);
                }
                None => {
                    return Err(Error::Domain(
                        "pole set is not closed under conjugation".into(),
                    ))
                }
            }
        }
    }
    let mut poly = vec![1.0];
    for f in factors {
        let mut out = vec![0.0; poly.len() + f.len() - 1];
        for (i, &a) in poly.iter().enumerate() {
            for (j, &b) in f.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        poly = out;
    }
    poly.pop(); // drop the leading 1
    Ok(poly)
}

/// Numerical rank by Gaussian elimination with full pivoting.
fn rank(m: &Matrix) -> usize {
    let mut a = m.clone();
    let n = a.rows().min(a.cols());
    let tol = 1e-10 * a.max_abs().max(1e-300);
    let mut r = 0;
    let mut rows: Vec<usize> = (0..a.rows()).collect();
    let mut cols: Vec<usize> = (0..a.cols()).collect();
    for k in 0..n {
        // full pivot search over the remaining block
        let mut best = (k, k, 0.0f64);
        for &i in &rows[k..] {
            for &j in &cols[k..] {
                if a[(i, j)].abs() > best.2 {
                    best = (i, j, a[(i, j)].abs());
                }
            }
        }
        if best.2 < tol {
            break;
        }
        let ri = rows[k..].iter().position(|&i| i == best.0).unwrap() + k;
        let ci = cols[k..].iter().position(|&j| j == best.1).unwrap() + k;
        rows.swap(k, ri);
        cols.swap(k, ci);
        r += 1;
        let piv = a[(rows[k], cols[k])];
        for &i in &rows[k + 1..] {
            let f = a[(i, cols[k])] / piv;
            for &j in &cols[k..] {
                a[(i, j)] -= f * a[(rows[k], j)];
            }
        }
    }
    r
}

//! Matrix exponential by scaling-and-squaring with the diagonal Pade(13)
//! approximant, and Van Loan block integrals built on top of it.
//!
//! Scaling threshold theta_13 = 5.3719... is the largest norm for which the
//! order-13 approximant meets double precision; below it no scaling is done.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::lu::LuFactors;

/// Pade(13) numerator coefficients b_0..b_13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// e^{At} for square `A` and finite scalar `t`.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    a.check_square("mat_exp")?;
    a.check_finite("mat_exp")?;
    if !t.is_finite() {
        return Err(Error::Domain("mat_exp: t must be finite".into()));
    }
    expm(&a.scale(t))
}

/// e^{M} for square `M`.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    let norm = m.norm_one();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a = m.scale(1.0 / (2f64.powi(s as i32)));

    // Pade(13): p(A) = U + V, q(A) = -U + V with
    // U = A(b13 A^6 + b11 A^4 + b9 A^2) A^6 + A(b7 A^6 + b5 A^4 + b3 A^2 + b1 I)
    // V = (b12 A^6 + b10 A^4 + b8 A^2) A^6 + b6 A^6 + b4 A^4 + b2 A^2 + b0 I
    let id = Matrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &(&a6.scale(PADE13[13]) + &a4.scale(PADE13[11])) + &a2.scale(PADE13[9]);
    let u_poly = &(&u_inner * &a6)
        + &(&(&(&a6.scale(PADE13[7]) + &a4.scale(PADE13[5])) + &a2.scale(PADE13[3]))
            + &id.scale(PADE13[1]));
    let u = &a * &u_poly;

    let v_inner = &(&a6.scale(PADE13[12]) + &a4.scale(PADE13[10])) + &a2.scale(PADE13[8]);
    let v = &(&v_inner * &a6)
        + &(&(&(&a6.scale(PADE13[6]) + &a4.scale(PADE13[4])) + &a2.scale(PADE13[2]))
            + &id.scale(PADE13[0]));

    let p = &v + &u;
    let q = &v - &u;
    let lu = LuFactors::factor(&q)?;
    let mut r = lu.solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Van Loan block integrals on one interval of length `h`:
/// F = e^{Ah}, G1 = int_0^h e^{As} ds, G2 = int_0^h s e^{As} ds.
///
/// All three come out of a single exponential of the block matrix
/// [[A, I, 0], [0, 0, I], [0, 0, 0]], whose top row holds
/// (e^{Ah}, int e^{A(h-s)} ds, int s' e^{A(h-s')}... ) so the outputs are
/// mutually consistent to machine precision.
pub fn expm_moment_integrals(a: &Matrix, h: f64) -> Result<(Matrix, Matrix, Matrix)> {
    a.check_square("expm_moment_integrals")?;
    a.check_finite("expm_moment_integrals")?;
    if !(h > 0.0) {
        return Err(Error::Domain("expm_moment_integrals: h must be > 0".into()));
    }
    let n = a.rows();
    let mut c = Matrix::zeros(3 * n, 3 * n);
    c.set_block(0, 0, &a.scale(h));
    c.set_block(0, n, &Matrix::identity(n).scale(h));
    c.set_block(n, 2 * n, &Matrix::identity(n).scale(h));
    let e = expm(&c)?;
    let f = e.block(0, 0, n, n);
    let g1 = e.block(0, n, n, n);
    // (1,3) block equals int_0^h (h - s) e^{As} ds = h*G1 - G2.
    let hg1_minus_g2 = e.block(0, 2 * n, n, n);
    let g2 = &g1.scale(h) - &hg1_minus_g2;
    Ok((f, g1, g2))
}

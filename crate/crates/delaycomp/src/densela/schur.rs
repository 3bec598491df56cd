//! Eigenvalues of general real matrices: balancing, Householder Hessenberg
//! reduction and Francis double-shift QR iteration. Eigenvalues only; the
//! crate uses this for Hurwitz checks and pole-placement verification.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Eigenvalues of a square real matrix as (re, im) pairs. Complex pairs come
/// out adjacent and conjugate.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<(f64, f64)>> {
    a.check_square("eigenvalues")?;
    a.check_finite("eigenvalues")?;
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Largest real part over the spectrum.
pub fn max_real_part(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Strict Hurwitz test: every eigenvalue real part below `-tol`.
pub fn is_hurwitz(a: &Matrix, tol: f64) -> Result<bool> {
    Ok(max_real_part(a)? < -tol)
}

/// Parlett-Reinsch balancing (similarity scaling by powers of 2).
fn balance(a: &mut Matrix) {
    let n = a.rows();
    let radix: f64 = 2.0;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / radix;
                let mut f = 1.0;
                let s = c + r;
                let mut c2 = c;
                while c2 < g {
                    f *= radix;
                    c2 *= radix * radix;
                }
                g = r * radix;
                while c2 > g {
                    f /= radix;
                    c2 /= radix * radix;
                }
                if (c2 + r / f) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= ginv;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Householder reduction to upper Hessenberg form (in place).
fn hessenberg(a: &mut Matrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        // annihilate column k below the subdiagonal
        let mut alpha = 0.0;
        for i in k + 1..n {
            alpha += a[(i, k)] * a[(i, k)];
        }
        alpha = alpha.sqrt();
        if alpha == 0.0 {
            continue;
        }
        if a[(k + 1, k)] > 0.0 {
            alpha = -alpha;
        }
        let mut v = vec![0.0; n];
        v[k + 1] = a[(k + 1, k)] - alpha;
        for i in k + 2..n {
            v[i] = a[(i, k)];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // A = (I - beta v v^T) A
        for j in 0..n {
            let s: f64 = (k + 1..n).map(|i| v[i] * a[(i, j)]).sum();
            let s = beta * s;
            for i in k + 1..n {
                a[(i, j)] -= s * v[i];
            }
        }
        // A = A (I - beta v v^T)
        for i in 0..n {
            let s: f64 = (k + 1..n).map(|j| v[j] * a[(i, j)]).sum();
            let s = beta * s;
            for j in k + 1..n {
                a[(i, j)] -= s * v[j];
            }
        }
        // clean up rounding below the subdiagonal
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroys `h`).
fn hqr(h: &mut Matrix) -> Result<Vec<(f64, f64)>> {
    let n = h.rows();
    let eps = f64::EPSILON;
    let mut eig = vec![(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(eig);
    }
    let mut t = 0.0;
    let mut nn = n as i64 - 1;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // find small subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let s = h[(l as usize - 1, l as usize - 1)].abs() + h[(l as usize, l as usize)].abs();
                let s = if s == 0.0 { anorm } else { s };
                if h[(l as usize, l as usize - 1)].abs() <= eps * s {
                    h[(l as usize, l as usize - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let x = h[(nn as usize, nn as usize)];
            if l == nn {
                eig[nn as usize] = (x + t, 0.0);
                nn -= 1;
                break;
            }
            let y = h[(nn as usize - 1, nn as usize - 1)];
            let w = h[(nn as usize, nn as usize - 1)] * h[(nn as usize - 1, nn as usize)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= 0.0 {
                    let z = p + z.abs().copysign(p);
                    let e1 = x + z;
                    let e2 = if z != 0.0 { x - w / z } else { e1 };
                    eig[nn as usize - 1] = (e1, 0.0);
                    eig[nn as usize] = (e2, 0.0);
                } else {
                    eig[nn as usize - 1] = (x + p, z);
                    eig[nn as usize] = (x + p, -z);
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(Error::Convergence(
                    "QR eigenvalue iteration did not converge".into(),
                ));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 || its == 30 || its == 40 || its == 50 {
                // exceptional shift
                t += x;
                for i in 0..=nn as usize {
                    h[(i, i)] -= x;
                }
                let s = h[(nn as usize, nn as usize - 1)].abs()
                    + h[(nn as usize - 1, nn as usize - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // look for two consecutive small subdiagonal elements
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let mu = m as usize;
                let z = h[(mu, mu)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(mu + 1, mu)] + h[(mu, mu + 1)];
                q = h[(mu + 1, mu + 1)] - z - rr - ss;
                r = h[(mu + 2, mu + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[(mu, mu - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (h[(mu - 1, mu - 1)].abs() + z.abs() + h[(mu + 1, mu + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                let iu = i as usize;
                h[(iu, iu - 2)] = 0.0;
                if i > m + 2 {
                    h[(iu, iu - 3)] = 0.0;
                }
            }
            // double QR step
            for k in m..=(nn - 1) {
                let ku = k as usize;
                if k != m {
                    p = h[(ku, ku - 1)];
                    q = h[(ku + 1, ku - 1)];
                    r = if k != nn - 1 { h[(ku + 2, ku - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        h[(ku, ku - 1)] = -h[(ku, ku - 1)];
                    }
                } else {
                    h[(ku, ku - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in ku..=nn as usize {
                    let mut pp = h[(ku, j)] + q * h[(ku + 1, j)];
                    if k != nn - 1 {
                        pp += r * h[(ku + 2, j)];
                        h[(ku + 2, j)] -= pp * z;
                    }
                    h[(ku + 1, j)] -= pp * y;
                    h[(ku, j)] -= pp * x;
                }
                let mmin = if nn < k + 3 { nn as usize } else { ku + 3 };
                for i in l as usize..=mmin {
                    let mut pp = x * h[(i, ku)] + y * h[(i, ku + 1)];
                    if k != nn - 1 {
                        pp += z * h[(i, ku + 2)];
                        h[(i, ku + 2)] -= pp * r;
                    }
                    h[(i, ku + 1)] -= pp * q;
                    h[(i, ku)] -= pp;
                }
            }
        }
    }
    // sort by real part then imaginary part for deterministic output
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}

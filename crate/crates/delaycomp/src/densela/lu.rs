//! Partial-pivot LU factorization and linear solve.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative pivot threshold below which the matrix is declared singular.
const PIVOT_TOL: f64 = 1e-13;

pub struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &Matrix) -> Result<Self> {
        a.check_square("lu")?;
        a.check_finite("lu")?;
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut p = k;
            let mut pmax = lu[(k, k)].abs();
            for i in k + 1..n {
                if lu[(i, k)].abs() > pmax {
                    pmax = lu[(i, k)].abs();
                    p = i;
                }
            }
            if pmax < PIVOT_TOL * scale {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / piv;
                lu[(i, k)] = m;
                for j in k + 1..n {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    /// Solve A X = B for each column of B.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "lu solve: rhs row count mismatch");
        let m = b.cols();
        let mut x = Matrix::zeros(n, m);
        for c in 0..m {
            // forward substitution on permuted rhs
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = b[(self.perm[i], c)];
                for j in 0..i {
                    s -= self.lu[(i, j)] * y[j];
                }
                y[i] = s;
            }
            // back substitution
            for i in (0..n).rev() {
                let mut s = y[i];
                for j in i + 1..n {
                    s -= self.lu[(i, j)] * x[(j, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.lu.rows()))
    }
}

/// Solve A X = B.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.rows() != a.rows() {
        return Err(Error::Dimension(format!(
            "solve_linear: A is {}x{} but B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    Ok(LuFactors::factor(a)?.solve(b))
}

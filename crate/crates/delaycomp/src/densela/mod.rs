//! Self-contained dense linear-algebra kernels: matrix exponential and Van
//! Loan block integrals, LU / Cholesky factorizations, symmetric and general
//! eigenvalue routines, Lyapunov and Riccati solvers, Ackermann pole
//! placement.

mod care;
mod chol;
mod expm;
mod jacobi;
mod lu;
mod lyap;
mod pole;
mod schur;

pub use care::solve_care;
pub use chol::cholesky;
pub use expm::{expm_moment_integrals, mat_exp};
pub use jacobi::{sym_eig, SymEigResult};
pub use lu::{solve_linear, LuFactors};
pub use lyap::solve_lyapunov;
pub use pole::{controllability_matrix, is_controllable, pole_place_siso};
pub use schur::{eigenvalues, is_hurwitz, max_real_part};

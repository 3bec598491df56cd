//! Finite-dimensional implementation of predictor feedback for linear
//! systems with input delay.
//!
//! The crate covers the full workflow:
//! - `densela`: dense linear-algebra kernels (expm, LU, eigensolvers,
//!   Lyapunov/Riccati, pole placement)
//! - `fem`: structure-preserving finite-element approximation of the
//!   transport equation modeling the delay
//! - `controller`: synthesis of the dynamic controller (K1, K2, A~d, B~d)
//!   and reference feedforward
//! - `lmi`: Legendre-projection stability certificate (assembly, feasibility
//!   solver, independent checker)
//! - `sim`: closed-loop and ideal-predictor simulation with Lyapunov
//!   monitoring
//! - `io`: run specs, controller/certificate documents, CSV export

pub mod controller;
pub mod densela;
pub mod error;
pub mod fem;
pub mod gauss;
pub mod io;
pub mod lmi;
pub mod matrix;
pub mod sim;

pub use error::{Error, Result};
pub use matrix::Matrix;

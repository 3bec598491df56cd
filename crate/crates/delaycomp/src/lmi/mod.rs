//! Stability certification: Legendre projection blocks, the LMI operator,
//! a feasibility solver and an independent certificate checker.

pub mod blocks;
pub mod legendre;
pub mod sdp;

pub use blocks::{
    assemble_blocks, check_certificate, lambda_operator, CertMargins, Certificate, LmiBlocks,
};
pub use legendre::{build_legendre_block, legendre_eval, LegendreBlock};
pub use sdp::{
    certificate_min_margin, find_min_l, solve_feasibility, FeasOptions, FeasOutcome, MinLReport,
    SweepEntry,
};

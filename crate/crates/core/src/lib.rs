//! Numerical laboratory for the homogenization of `2m`-order elliptic systems
//! with almost-periodic coefficients.
//!
//! The crate is organised bottom-up:
//!
//! * [`apfield`] – trigonometric coefficient fields and almost-periodicity
//!   functionals (`S^p_R` norms, mean values, difference operators, `ω_k`, `ρ_k`).
//! * [`discrete`] – periodic and pinned-box grids, mimetic forward/backward
//!   differences, the divergence-form operator and a preconditioned CG solver.
//! * [`corrector`] – approximate correctors `χ_T`, homogenized tensors, fluxes,
//!   dual correctors and their diagnostics.
//! * [`bvp`] – Dirichlet problems on boxes, smoothing operators and the
//!   two-scale expansion error.
//! * [`fit`] – log-log exponent fitting shared by the diagnostics.

// negated float comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apfield;
pub mod bvp;
pub mod corrector;
pub mod discrete;
pub mod error;
pub mod fit;

pub use error::{Error, Result};

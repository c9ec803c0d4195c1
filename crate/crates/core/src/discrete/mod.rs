//! Finite-difference calculus on uniform grids.
//!
//! Forward differences `F^β` build the gradient and backward differences
//! `B^α = (−1)^{|α|}(F^α)ᵀ` its adjoint, so the assembled operator
//! `(−1)^m Σ B^α(A^{αβ}F^β ·) + τ` is exactly symmetric for symmetric `A`.
//! Field values are stored row-major over axes with the component index
//! innermost.

pub mod coeff;
pub mod diff;
pub mod grid;
pub mod norms;
pub mod operator;
pub mod precond;
pub mod solver;

pub use coeff::{sample_evaluable, sample_on_grid, SampledAdmissibility, SampledCoeff};
pub use diff::{apply_dalpha, diff_axis, Variant};
pub use grid::{Grid, GridField, Topology, TorusGrid};
pub use norms::{ball_mean, grid_norm, gradient_sq, windowed_lp, windowed_mean_max, CenterRegion, NormKind};
pub use operator::{apply_operator, mass_term, EllipticOperator, LinearOperator, PolyharmonicOperator};
pub use precond::{Preconditioner, PreconditionerKind};
pub use solver::{solve_spd, solve_spd_with, SolveReport, SolverConfig};

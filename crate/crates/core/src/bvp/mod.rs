//! Dirichlet problems on boxes, smoothing operators and the two-scale expansion.
//!
//! Zero Dirichlet traces are imposed by pinning `m` node layers on each side.

pub mod problem;
pub mod smoothing;
pub mod two_scale;

pub use problem::{solve_eps_problem, solve_homogenized, BoxDomain, BvpConfig, DirichletProblem};
pub use smoothing::{cutoff_eta, k_eps_delta, mollifier_profile, mollify_s, SmoothingConfig};
pub use two_scale::{two_scale_corrector_grid, two_scale_error, TwoScaleError, TwoScaleNorms};

//! Approximate correctors, homogenized tensors, fluxes and dual correctors.
//!
//! All solves live on periodic boxes of side `c_box · T`. Corrector column
//! `g · n + l` holds `χ^{γ_g}_{·l}` for the `g`-th multi-index of order `m`.

pub mod approx;
pub mod diagnostics;
pub mod dual;
pub mod homogenized;

pub use approx::{
    corrector_grid, corrector_mean, corrector_norm_profile, corrector_norm_profile_in, gradient_density,
    solve_approx_corrector, solve_approx_corrector_shifted, solve_corrector_sampled, CorrectorConfig, CorrectorSet,
};
pub use diagnostics::{
    cauchy_distance, cauchy_distance_from, export_bundle, ratio_spread, translation_sensitivity, BundleMetadata,
    CauchyDistance, TranslationPair, MIN_TRANSLATION_RHS,
};
pub use dual::{flux_divergence_check, solve_dual_corrector, DualCorrectorSet, FluxCheck};
pub use homogenized::{compute_ahat, compute_flux, FluxTensor, HomogenizedTensor, Provenance};

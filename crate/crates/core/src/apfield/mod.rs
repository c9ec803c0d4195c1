//! Trigonometric coefficient fields and almost-periodicity functionals.
//!
//! Multi-indices `α` with `|α| = m` are enumerated in ascending lexicographic
//! order of their exponent tuples; tensors `A^{αβ}_{ij}` are stored row-major
//! in `(α, β, i, j)`.

pub mod config;
pub mod field;
pub mod functionals;
pub mod multi_index;
pub mod sampling;
pub mod tensor;

pub use config::{FieldConfig, ModeConfig, TensorSpec};
pub use field::{
    check_admissible, AdmissibilityReport, CoeffField, CoeffMode, CoefficientField, Differenced, Evaluable, FnField,
    PerturbedField, Shifted, TrigField, TrigMode,
};
pub use functionals::{
    fit_rho_decay, fit_theta, mean_value, norm_spr, omega_k, rho_k, MeanEstimate, RhoSource, SyntheticRho, ThetaFit,
    RHO_ZERO,
};
pub use multi_index::{multi_indices, MultiIndex};
pub use sampling::{BallQuadrature, SamplerConfig};
pub use tensor::{CoeffTensor, FieldShape};

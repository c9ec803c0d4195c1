//! Experiment sweeps over the `aphom-core` solvers: declarative TOML specs,
//! exponent fits, pass/fail checks and CSV/JSON/SVG reports.

pub mod emit;
pub mod experiments;
pub mod report;
pub mod spec;

pub use experiments::run;
pub use report::ExperimentReport;
pub use spec::{ExperimentKind, ExperimentSpec};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("perturbed field is not admissible: {0}")]
    AdmissibilityLost(String),
    #[error(transparent)]
    Core(#[from] aphom_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

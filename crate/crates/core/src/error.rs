use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient field is not admissible: {0}")]
    NotAdmissible(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("negative curvature {curvature:e} detected at iteration {iteration}")]
    IndefiniteDetected { iteration: usize, curvature: f64 },

    #[error("grid spacing h = {h} does not resolve eps = {eps} (need h <= eps/16)")]
    ResolutionTooCoarse { eps: f64, h: f64 },

    #[error("mollifier radius eps = {eps} is under-resolved by h = {h} (need eps >= 2h)")]
    KernelUnderresolved { eps: f64, h: f64 },

    #[error("{count} nodes within eps of the boundary carry mass")]
    SupportViolation { count: usize },

    #[error("grid incompatibility: {0}")]
    GridIncompatible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

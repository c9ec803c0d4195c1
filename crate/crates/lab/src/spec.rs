use std::path::{Path, PathBuf};

use aphom_core::apfield::{CoeffField, FieldConfig, SamplerConfig, SyntheticRho};
use aphom_core::discrete::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Converge,
    CorrectorGrowth,
    RhoDecay,
    Perturb,
    HolderProfile,
    FluxIdentity,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::CorrectorGrowth => "corrector_growth",
            ExperimentKind::RhoDecay => "rho_decay",
            ExperimentKind::Perturb => "perturb",
            ExperimentKind::HolderProfile => "holder_profile",
            ExperimentKind::FluxIdentity => "flux_identity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg],
        }
    }
}

/// `E(y) = amplitude · cos(ξ·y + phase) / (1 + |y|)` added to every diagonal entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Frequency in cycles per unit length.
    pub cycles: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
    pub amplitude: f64,
    /// Admissibility constant of the perturbed field as a fraction of the base `μ`.
    #[serde(default = "half")]
    pub mu_factor: f64,
}

fn half() -> f64 {
    0.5
}

/// Sweep lists and thresholds; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub eps: Vec<f64>,
    pub t: Vec<f64>,
    pub l: Vec<f64>,
    pub radii: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub decay_t: Vec<f64>,
    /// Order of `ρ_k`.
    pub k: usize,
    /// Exponent of the `S^p` and ball-average norms.
    pub p: f64,
    /// Corrector grid spacing.
    pub h: f64,
    /// Box nodes per `ε`.
    pub resolution: f64,
    pub two_grid: bool,
    pub two_grid_tol: f64,
    /// `T` of the corrector solve that supplies `Â` in convergence runs.
    pub t_ref: f64,
    /// Replaces `T = ε^{−1/m}` in convergence runs.
    pub t_override: Option<f64>,
    pub c_box: f64,
    pub mean_tol: f64,
    pub domain_lower: Option<Vec<f64>>,
    pub domain_upper: Option<Vec<f64>>,
    /// Constant added to the sine source.
    pub source_offset: f64,
    pub min_slope: f64,
    pub perturbed_min_slope: f64,
    pub max_growth: f64,
    /// Levels `l` whose growth exponent is checked (all `l ≤ m` when absent).
    pub growth_levels: Option<Vec<usize>>,
    /// Adds the fit residual to `max_growth`.
    pub growth_residual_slack: bool,
    /// Required decay exponent of the Cauchy distance, in units of `m`.
    pub cauchy_min_decay: Option<f64>,
    /// Decay exponent from a `rho_decay` run, compared against lower-order growth.
    pub theta_hat: Option<f64>,
    pub theta_tol: f64,
    pub centers: usize,
    pub max_sigma: f64,
    pub center_factor: Option<f64>,
    pub max_decay_growth: f64,
    pub flux_factor: f64,
    /// Admissible band for the identity-residual ratio between the loosest and
    /// tightest tolerance, divided by the ratio of the solve residuals reached.
    pub flux_scaling: [f64; 2],
}

impl Default for Params {
    fn default() -> Self {
        Params {
            eps: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            t: vec![8.0, 16.0, 32.0, 64.0],
            l: vec![1.0, 2.0, 4.0, 8.0],
            radii: vec![1.0, 2.0, 4.0, 8.0],
            tolerances: vec![1e-9, 1e-7],
            decay_t: vec![4.0, 8.0, 16.0, 32.0],
            k: 1,
            p: 4.0,
            h: 1.0 / 32.0,
            resolution: 32.0,
            two_grid: true,
            two_grid_tol: 0.1,
            t_ref: 256.0,
            t_override: None,
            c_box: 8.0,
            mean_tol: 1e-7,
            domain_lower: None,
            domain_upper: None,
            source_offset: 0.5,
            min_slope: 0.9,
            perturbed_min_slope: 0.85,
            max_growth: 0.1,
            growth_levels: None,
            growth_residual_slack: false,
            cauchy_min_decay: Some(0.9),
            theta_hat: None,
            theta_tol: 0.05,
            centers: 3,
            max_sigma: 1.0,
            center_factor: None,
            max_decay_growth: 0.1,
            flux_factor: 10.0,
            flux_scaling: [0.1, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub fields: Vec<FieldConfig>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub synthetic: Option<SyntheticRho>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn is_dyadic(v: &[f64]) -> bool {
    v.windows(2).all(|w| {
        let r = w[1] / w[0];
        (r - 2.0).abs() < 1e-9 || (r - 0.5).abs() < 1e-9
    })
}

fn positive(name: &str, v: &[f64]) -> Result<(), LabError> {
    if v.is_empty() {
        return Err(LabError::Spec(format!("`{name}` must not be empty")));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(LabError::Spec(format!("`{name}` entries must be positive and finite")));
    }
    Ok(())
}

fn dyadic_sweep(name: &str, v: &[f64]) -> Result<(), LabError> {
    positive(name, v)?;
    if v.len() < 4 || !is_dyadic(v) {
        return Err(LabError::Spec(format!("`{name}` must be a dyadic sweep with at least 4 points")));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self, LabError> {
        let spec: ExperimentSpec = toml::from_str(s).map_err(|e| LabError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, LabError> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String, LabError> {
        toml::to_string(self).map_err(|e| LabError::Spec(e.to_string()))
    }

    pub fn build_fields(&self) -> Result<Vec<CoeffField>, LabError> {
        Ok(self.fields.iter().map(|f| f.build()).collect::<Result<Vec<_>, _>>()?)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let p = &self.params;
        if self.fields.is_empty() && !(self.kind == ExperimentKind::RhoDecay && self.synthetic.is_some()) {
            return Err(LabError::Spec("at least one `[[fields]]` entry is required".into()));
        }
        self.solver.validate()?;
        self.sampler.validate()?;
        for f in &self.fields {
            f.build()?;
        }
        if !(p.h > 0.0 && p.c_box > 0.0 && p.resolution >= 16.0) {
            return Err(LabError::Spec("need h > 0, c_box > 0 and resolution ≥ 16".into()));
        }
        match self.kind {
            ExperimentKind::Converge => {
                dyadic_sweep("eps", &p.eps)?;
                if p.eps.iter().any(|e| *e >= 1.0) {
                    return Err(LabError::Spec("`eps` entries must be below 1".into()));
                }
            }
            ExperimentKind::Perturb => {
                dyadic_sweep("eps", &p.eps)?;
                dyadic_sweep("decay_t", &p.decay_t)?;
                if self.perturbation.is_none() {
                    return Err(LabError::Spec("perturb runs need a `[perturbation]` table".into()));
                }
            }
            ExperimentKind::CorrectorGrowth => dyadic_sweep("t", &p.t)?,
            ExperimentKind::RhoDecay => {
                positive("l", &p.l)?;
                let span = p.l.last().unwrap() / p.l[0];
                if p.l.len() < 3 || span < 4.0 - 1e-9 || p.l.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(LabError::Spec("`l` must increase, have ≥ 3 points and span ≥ 2 octaves".into()));
                }
                let l_max = p.l.last().unwrap();
                if self.sampler.window < 4.0 * l_max {
                    return Err(LabError::Spec(format!(
                        "sampler.window = {} must be at least 4 · max L = {}",
                        self.sampler.window,
                        4.0 * l_max
                    )));
                }
            }
            ExperimentKind::HolderProfile => {
                positive("t", &p.t)?;
                dyadic_sweep("radii", &p.radii)?;
                if p.centers == 0 {
                    return Err(LabError::Spec("`centers` must be positive".into()));
                }
            }
            ExperimentKind::FluxIdentity => {
                positive("t", &p.t)?;
                positive("tolerances", &p.tolerances)?;
            }
        }
        Ok(())
    }
}

//! One runner per [`ExperimentKind`]. Rows are computed in parallel and
//! collected in parameter order, so reports do not depend on scheduling.

mod converge;
mod flux;
mod growth;
mod holder;
mod perturb;
mod rho;

use aphom_core::apfield::{CoeffTensor, CoefficientField, FnField};
use aphom_core::bvp::{BoxDomain, BvpConfig};
use aphom_core::corrector::{compute_ahat, corrector_grid, solve_approx_corrector, CorrectorConfig, HomogenizedTensor};
use aphom_core::discrete::SolverConfig;

use crate::report::{Environment, ExperimentReport};
use crate::spec::{ExperimentKind, ExperimentSpec};
use crate::LabError;

pub use converge::run_converge;
pub use flux::run_flux_identity;
pub use growth::run_corrector_growth;
pub use holder::run_holder_profile;
pub use perturb::run_perturb;
pub use rho::run_rho_decay;

pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport, LabError> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Converge => run_converge(spec),
        ExperimentKind::CorrectorGrowth => run_corrector_growth(spec),
        ExperimentKind::RhoDecay => run_rho_decay(spec),
        ExperimentKind::Perturb => run_perturb(spec),
        ExperimentKind::HolderProfile => run_holder_profile(spec),
        ExperimentKind::FluxIdentity => run_flux_identity(spec),
    }
}

fn require_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<(), LabError> {
    if spec.kind != kind {
        return Err(LabError::Spec(format!("expected kind `{}`, got `{}`", kind.as_str(), spec.kind.as_str())));
    }
    Ok(())
}

pub(crate) fn environment(spec: &ExperimentSpec) -> Environment {
    Environment {
        version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
        seed: spec.seed,
        rel_tol: spec.solver.rel_tol,
        preconditioner: serde_json::to_value(spec.solver.preconditioner)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        c_box: spec.params.c_box,
        p: spec.params.p,
    }
}

pub(crate) fn corrector_config(spec: &ExperimentSpec, solver: SolverConfig) -> CorrectorConfig {
    CorrectorConfig {
        solver,
        c_box: spec.params.c_box,
        mean_tol: spec.params.mean_tol,
    }
}

/// Sampler with the run seed substituted.
pub(crate) fn sampler(spec: &ExperimentSpec) -> aphom_core::apfield::SamplerConfig {
    let mut s = spec.sampler.clone();
    s.seed = spec.seed;
    s
}

/// Box from the experiment params (unit cube by default) with spacing at most `eps / resolution`.
pub(crate) fn domain(spec: &ExperimentSpec, d: usize, m: usize, eps: f64, resolution: f64) -> Result<BoxDomain, LabError> {
    let lower = spec.params.domain_lower.clone().unwrap_or_else(|| vec![0.0; d]);
    let upper = spec.params.domain_upper.clone().unwrap_or_else(|| vec![1.0; d]);
    if lower.len() != d || upper.len() != d {
        return Err(LabError::Spec(format!("domain bounds must have {d} entries")));
    }
    let intervals = lower
        .iter()
        .zip(&upper)
        .map(|(a, b)| ((b - a) * resolution / eps - 1e-9).ceil().max(1.0) as usize)
        .collect();
    Ok(BoxDomain::new(lower, upper, intervals, m)?)
}

pub(crate) fn bvp_config(spec: &ExperimentSpec) -> BvpConfig {
    BvpConfig {
        solver: spec.solver,
        resolution: spec.params.resolution,
    }
}

/// `f(x) = Π_k sin(π (x_k − a_k)/(b_k − a_k)) + offset` in every component.
pub(crate) fn sine_source(dom: &BoxDomain, n: usize, offset: f64) -> FnField<impl Fn(&[f64], &mut [f64]) + Sync> {
    let lower = dom.lower.clone();
    let width: Vec<f64> = dom.upper.iter().zip(&dom.lower).map(|(b, a)| b - a).collect();
    FnField::new(dom.d(), n, move |x: &[f64], out: &mut [f64]| {
        let s: f64 = x
            .iter()
            .zip(&lower)
            .zip(&width)
            .map(|((xk, a), w)| (std::f64::consts::PI * (xk - a) / w).sin())
            .product();
        out.fill(s + offset);
    })
}

/// `Â` from a corrector solve at `T_ref`, or the field itself when it is constant.
pub(crate) fn reference_ahat(
    field: &dyn CoefficientField,
    spec: &ExperimentSpec,
) -> Result<HomogenizedTensor, LabError> {
    let shape = field.shape();
    if field.is_constant() {
        let a = CoeffTensor::from_vec(shape.na(), shape.n, field.eval(&vec![0.0; shape.d]))?;
        return Ok(HomogenizedTensor::from_constant(shape, a, field.name()));
    }
    let p = &spec.params;
    let grid = corrector_grid(shape.d, p.t_ref, p.c_box, p.h)?;
    let set = solve_approx_corrector(field, p.t_ref, &grid, &corrector_config(spec, spec.solver))?;
    Ok(compute_ahat(&set)?)
}

pub(crate) fn fmt_label(name: &str, v: f64) -> String {
    format!("{name}={v}")
}

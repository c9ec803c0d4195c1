use aphom_core::apfield::{
    check_admissible, BallQuadrature, CoeffField, CoefficientField, Evaluable, PerturbedField, TrigField, TrigMode,
};
use rayon::prelude::*;

use super::converge::{convergence_sweep, COLUMNS as CONVERGE_COLUMNS};
use super::{environment, fmt_label, reference_ahat, require_kind, sampler};
use crate::report::{num, Check, CheckStatus, ExperimentReport, FitStatus, Row, RowStatus, Series};
use crate::spec::{ExperimentKind, ExperimentSpec, PerturbationSpec};
use crate::LabError;

/// Builds `Ã = A + b/(1 + |y|)` with `b = s·cos(ξ·y + φ)·I`, shrinking `s`
/// until `Ã` is admissible with constant `mu_factor · μ`.
pub fn perturbed_field(base: &CoeffField, pert: &PerturbationSpec) -> Result<PerturbedField, LabError> {
    let shape = base.shape();
    if pert.cycles.len() != shape.d {
        return Err(LabError::Spec(format!("perturbation needs {} frequency entries", shape.d)));
    }
    if !(pert.mu_factor > 0.0 && pert.mu_factor <= 1.0) {
        return Err(LabError::Spec("mu_factor must lie in (0, 1]".into()));
    }
    let mu = base.mu() * pert.mu_factor;
    let adm = check_admissible(base)?;
    // diagonal shift by at most |s| keeps the form ≥ λ_min − |s| and entries ≤ max + |s|
    let room = (adm.min_eigen - mu).min(1.0 / mu - adm.max_abs).max(0.0);
    let s = pert.amplitude.signum() * pert.amplitude.abs().min(room);
    let (na, n) = (shape.na(), shape.n);
    let mut amp = vec![0.0; shape.tensor_len()];
    for a in 0..na {
        for i in 0..n {
            amp[((a * na + a) * n + i) * n + i] = s;
        }
    }
    let freq = pert.cycles.iter().map(|c| std::f64::consts::TAU * c).collect();
    let modes = if s == 0.0 {
        Vec::new()
    } else {
        vec![TrigMode {
            frequency: freq,
            phase: pert.phase,
            amplitude: amp,
        }]
    };
    let bump = TrigField::new(shape.d, vec![0.0; shape.tensor_len()], modes)?;
    let field = PerturbedField::new(base.clone(), bump, mu)?;
    let rep = check_admissible(&field)?;
    if !rep.ok() {
        return Err(LabError::AdmissibilityLost(format!(
            "min eigenvalue {} and max entry {} against mu = {mu}",
            rep.min_eigen, rep.max_abs
        )));
    }
    Ok(field)
}

/// `T · (⨍_{B(0,T)} |E|^p)^{1/p}` with `|E|` the Euclidean norm of the entries.
pub fn decay_value(field: &PerturbedField, t: f64, p: f64, q: &BallQuadrature) -> f64 {
    let e = field.perturbation();
    let mut buf = vec![0.0; e.ncomp()];
    let mean: f64 = q
        .nodes
        .iter()
        .zip(&q.weights)
        .map(|(x, w)| {
            e.eval_into(x, &mut buf);
            w * buf.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p)
        })
        .sum();
    t * mean.powf(1.0 / p)
}

pub fn run_perturb(spec: &ExperimentSpec) -> Result<ExperimentReport, LabError> {
    require_kind(spec, ExperimentKind::Perturb)?;
    let pert = spec
        .perturbation
        .as_ref()
        .ok_or_else(|| LabError::Spec("missing [perturbation] table".into()))?;
    let mut cols = CONVERGE_COLUMNS.to_vec();
    cols.push("decay");
    let mut report = ExperimentReport::new(spec.kind, &cols, environment(spec));
    let ncols = cols.len();
    let decay_col = ncols - 1;
    let t_col = 1;
    let p = &spec.params;
    let cfg = sampler(spec);
    for base in spec.build_fields()? {
        let tilde = perturbed_field(&base, pert)?;
        let tname = tilde.name().to_string();
        let rows: Vec<Row> = p
            .decay_t
            .par_iter()
            .map(|&t| {
                let label = fmt_label("decay_T", t);
                match BallQuadrature::new(base.shape().d, t, &cfg) {
                    Ok(q) => {
                        let mut values = vec![None; ncols];
                        values[t_col] = Some(t);
                        values[decay_col] = num(decay_value(&tilde, t, p.p, &q));
                        Row {
                            field: tname.clone(),
                            label,
                            status: RowStatus::Ok,
                            error: None,
                            h: 0.0,
                            extent: 2.0 * t,
                            rel_tol: spec.solver.rel_tol,
                            values,
                        }
                    }
                    Err(e) => Row::failed(&tname, label, ncols, e),
                }
            })
            .collect();
        report.rows.extend(rows);
        let (xs, ys): (Vec<f64>, Vec<f64>) = report
            .rows
            .iter()
            .filter(|r| r.field == tname && r.status == RowStatus::Ok)
            .filter_map(|r| Some((r.values[t_col]?, r.values[decay_col]?)))
            .unzip();
        let fit = report.push_fit(
            "decay_table",
            Series {
                name: "decay".into(),
                field: tname.clone(),
                xs,
                ys,
            },
        );
        let check = match fit.status {
            FitStatus::Degenerate => Check::new(
                "decay_bounded",
                &tname,
                CheckStatus::Pass,
                None,
                format!("<= {}", p.max_decay_growth),
                "E = 0".into(),
            ),
            _ => Check::bound(
                "decay_bounded",
                &tname,
                fit.exponent.unwrap_or(f64::NAN),
                p.max_decay_growth,
                true,
                "growth exponent of T (avg_B(0,T) |E|^p)^(1/p) over the T table".into(),
            ),
        };
        report.checks.push(check);
        // Â is shared: E decays, so it does not change the mean of the coefficients
        let ahat = match reference_ahat(&base, spec) {
            Ok(a) => a,
            Err(e) => {
                report.rows.push(Row::failed(&base.name, "ahat".into(), ncols, e));
                continue;
            }
        };
        let s0 = convergence_sweep(&mut report, &base, &ahat, spec, "base_slope", p.min_slope);
        let s1 = convergence_sweep(&mut report, &tilde, &ahat, spec, "perturbed_slope", p.perturbed_min_slope);
        if let (Some(a), Some(b)) = (s0, s1) {
            report.notes.push(format!("{}: base slope {a:.4}, perturbed slope {b:.4}", base.name));
        }
    }
    Ok(report)
}

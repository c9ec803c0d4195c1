use aphom_core::apfield::CoefficientField;
use aphom_core::bvp::{
    solve_eps_problem, solve_homogenized, two_scale_corrector_grid, two_scale_error, DirichletProblem, SmoothingConfig,
    TwoScaleNorms,
};
use aphom_core::corrector::{solve_approx_corrector, HomogenizedTensor};
use rayon::prelude::*;

use super::{bvp_config, corrector_config, domain, environment, fmt_label, reference_ahat, require_kind, sine_source};
use crate::report::{num, Check, CheckStatus, ExperimentReport, FitStatus, Row, RowStatus, Series, DEGENERATE_TOL};
use crate::spec::{ExperimentKind, ExperimentSpec};
use crate::LabError;

pub(crate) const COLUMNS: [&str; 10] = [
    "eps",
    "T",
    "diff_l2",
    "diff_hm1",
    "diff_hm",
    "omega_l2",
    "omega_hm1",
    "omega_hm",
    "diff_hm1_fine",
    "two_grid_change",
];

struct Point {
    t: f64,
    h: f64,
    extent: f64,
    norms: TwoScaleNorms,
}

fn solve_point(
    field: &dyn CoefficientField,
    ahat: &HomogenizedTensor,
    spec: &ExperimentSpec,
    eps: f64,
    resolution: f64,
) -> Result<Point, LabError> {
    let shape = field.shape();
    let p = &spec.params;
    let dom = domain(spec, shape.d, shape.m, eps, resolution)?;
    let src = sine_source(&dom, shape.n, p.source_offset);
    let bcfg = bvp_config(spec);
    let u_eps = solve_eps_problem(&DirichletProblem { field, eps, source: &src }, &dom, &bcfg)?;
    let u0 = solve_homogenized(ahat, &src, &dom, &bcfg)?;
    let t = p.t_override.unwrap_or_else(|| eps.powf(-1.0 / shape.m as f64));
    let cgrid = two_scale_corrector_grid(&dom, eps, t, p.c_box)?;
    let set = solve_approx_corrector(field, t, &cgrid, &corrector_config(spec, spec.solver))?;
    let scfg = SmoothingConfig::for_domain(eps, &dom)?;
    let err = two_scale_error(&u_eps, &u0, &set, &scfg, &dom)?;
    let extent = dom.upper.iter().zip(&dom.lower).fold(0.0, |m: f64, (b, a)| m.max(b - a));
    Ok(Point {
        t,
        h: dom.h_max(),
        extent,
        norms: err.norms,
    })
}

fn point_row(
    field: &dyn CoefficientField,
    ahat: &HomogenizedTensor,
    spec: &ExperimentSpec,
    eps: f64,
    ncols: usize,
) -> Row {
    let label = fmt_label("eps", eps);
    let name = field.name();
    let coarse = match solve_point(field, ahat, spec, eps, spec.params.resolution) {
        Ok(c) => c,
        Err(e) => return Row::failed(name, label, ncols, e),
    };
    let n = coarse.norms;
    let (fine, change) = if spec.params.two_grid {
        match solve_point(field, ahat, spec, eps, 2.0 * spec.params.resolution) {
            Ok(f) => {
                let (a, b) = (n.diff_hm1, f.norms.diff_hm1);
                let change = if a.max(b) <= DEGENERATE_TOL { 0.0 } else { (a - b).abs() / b.abs().max(a.abs()) };
                (Some(b), Some(change))
            }
            Err(e) => return Row::failed(name, label, ncols, format!("two-grid rerun: {e}")),
        }
    } else {
        (None, None)
    };
    let mut values = vec![
        Some(eps),
        num(coarse.t),
        num(n.diff_l2),
        num(n.diff_hm1),
        num(n.diff_hm),
        num(n.omega_l2),
        num(n.omega_hm1),
        num(n.omega_hm),
        fine,
        change,
    ];
    values.resize(ncols, None);
    Row {
        field: name.to_string(),
        label,
        status: RowStatus::Ok,
        error: None,
        h: coarse.h,
        extent: coarse.extent,
        rel_tol: spec.solver.rel_tol,
        values,
    }
}

/// Convergence rows for one field over the `ε` sweep, plus the slope fit and
/// two-grid checks; returns the fitted slope when conclusive.
pub(crate) fn convergence_sweep(
    report: &mut ExperimentReport,
    field: &dyn CoefficientField,
    ahat: &HomogenizedTensor,
    spec: &ExperimentSpec,
    slope_check: &str,
    min_slope: f64,
) -> Option<f64> {
    let ncols = report.columns.len();
    let rows: Vec<Row> = spec
        .params
        .eps
        .par_iter()
        .map(|&eps| point_row(field, ahat, spec, eps, ncols))
        .collect();
    report.rows.extend(rows);
    let name = field.name().to_string();
    let eps = report.values(&name, "eps");
    let err = report.values(&name, "diff_hm1");
    let fit = report.push_fit(
        slope_check,
        Series {
            name: "diff_hm1".into(),
            field: name.clone(),
            xs: eps,
            ys: err,
        },
    );
    let check = match fit.status {
        FitStatus::Degenerate => Check::new(
            slope_check,
            &name,
            CheckStatus::Pass,
            None,
            format!(">= {min_slope}"),
            "degenerate: every error vanishes".into(),
        ),
        FitStatus::Inconclusive => Check::new(
            slope_check,
            &name,
            CheckStatus::Inconclusive,
            fit.exponent,
            format!(">= {min_slope}"),
            format!("fit residual {:?} over {} points", fit.residual, fit.points),
        ),
        FitStatus::Conclusive => {
            let s = fit.exponent.unwrap_or(f64::NAN);
            Check::bound(slope_check, &name, s, min_slope, false, format!("fit residual {:.3e}", fit.residual.unwrap_or(0.0)))
        }
    };
    report.checks.push(check);
    if spec.params.two_grid {
        let worst = report.values(&name, "two_grid_change").into_iter().fold(0.0, f64::max);
        report.checks.push(Check::bound(
            "two_grid",
            &name,
            worst,
            spec.params.two_grid_tol,
            true,
            "largest relative change of diff_hm1 under one grid halving".into(),
        ));
    }
    (fit.status == FitStatus::Conclusive).then_some(fit.exponent).flatten()
}

pub fn run_converge(spec: &ExperimentSpec) -> Result<ExperimentReport, LabError> {
    require_kind(spec, ExperimentKind::Converge)?;
    let mut report = ExperimentReport::new(spec.kind, &COLUMNS, environment(spec));
    for field in spec.build_fields()? {
        match reference_ahat(&field, spec) {
            Ok(ahat) => {
                convergence_sweep(&mut report, &field, &ahat, spec, "slope", spec.params.min_slope);
            }
            Err(e) => {
                let ncols = report.columns.len();
                report.rows.push(Row::failed(&field.name, "ahat".into(), ncols, e));
            }
        }
    }
    Ok(report)
}

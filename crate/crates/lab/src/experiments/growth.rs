use aphom_core::apfield::{CoeffField, CoefficientField};
use aphom_core::corrector::{
    cauchy_distance_from, corrector_grid, corrector_norm_profile, solve_approx_corrector, CorrectorSet,
};
use rayon::prelude::*;

use super::{corrector_config, environment, fmt_label, require_kind};
use crate::report::{num, Check, CheckStatus, ExperimentReport, FitRecord, FitStatus, Row, RowStatus, Series};
use crate::spec::{ExperimentKind, ExperimentSpec};
use crate::LabError;

/// Cauchy distances decay like `T^{-2m}`; only roundoff-level values count as zero.
const CAUCHY_ZERO: f64 = 1e-14;

fn columns(max_m: usize) -> Vec<String> {
    let mut c = vec!["T".to_string()];
    c.extend((0..=max_m).map(|l| format!("grad_l{l}")));
    c.extend(["cauchy_top", "cauchy_zeroth", "relative_mean", "max_residual"].map(String::from));
    c
}

fn solve(field: &CoeffField, t: f64, spec: &ExperimentSpec) -> Result<CorrectorSet, LabError> {
    let shape = field.shape();
    let grid = corrector_grid(shape.d, t, spec.params.c_box, spec.params.h)?;
    Ok(solve_approx_corrector(field, t, &grid, &corrector_config(spec, spec.solver))?)
}

fn growth_row(field: &CoeffField, t: f64, sets: &[(f64, Result<CorrectorSet, String>)], spec: &ExperimentSpec, ncols: usize) -> Row {
    let label = fmt_label("T", t);
    let find = |tt: f64| sets.iter().find(|(s, _)| (s - tt).abs() < 1e-12).map(|(_, r)| r);
    let set = match find(t) {
        Some(Ok(s)) => s,
        Some(Err(e)) => return Row::failed(&field.name, label, ncols, e),
        None => return Row::failed(&field.name, label, ncols, "missing corrector set"),
    };
    let m = field.shape().m;
    let mut values = vec![None; ncols];
    values[0] = Some(t);
    for l in 0..=m {
        match corrector_norm_profile(set, l, &[1.0]) {
            Ok(v) => values[1 + l] = num(v[0]),
            Err(e) => return Row::failed(&field.name, label, ncols, e),
        }
    }
    let base = ncols - 4;
    match find(2.0 * t) {
        Some(Ok(s2)) => match cauchy_distance_from(s2, t, &corrector_config(spec, spec.solver)) {
            Ok(c) => {
                values[base] = num(c.top);
                values[base + 1] = num(c.zeroth);
            }
            Err(e) => return Row::failed(&field.name, label, ncols, format!("cauchy distance: {e}")),
        },
        Some(Err(e)) => return Row::failed(&field.name, label, ncols, format!("corrector at 2T: {e}")),
        None => {}
    }
    values[base + 2] = num(set.relative_mean());
    values[base + 3] = num(set.max_residual());
    Row {
        field: field.name.clone(),
        label,
        status: RowStatus::Ok,
        error: None,
        h: set.grid.h_max(),
        extent: set.grid.extent(0),
        rel_tol: spec.solver.rel_tol,
        values,
    }
}

fn exponent_check(name: &str, field: &str, fit: &FitRecord, bound: f64, upper: bool, detail: String) -> Check {
    let op = if upper { "<=" } else { ">=" };
    match fit.status {
        FitStatus::Degenerate => Check::new(name, field, CheckStatus::Pass, None, format!("{op} {bound}"), "degenerate: identically zero".into()),
        FitStatus::Inconclusive => Check::new(
            name,
            field,
            CheckStatus::Inconclusive,
            fit.exponent,
            format!("{op} {bound}"),
            format!("fit residual {:?}", fit.residual),
        ),
        FitStatus::Conclusive => {
            let e = fit.exponent.unwrap_or(f64::NAN);
            let v = if upper { e } else { -e };
            Check::bound(name, field, v, bound, upper, detail)
        }
    }
}

pub fn run_corrector_growth(spec: &ExperimentSpec) -> Result<ExperimentReport, LabError> {
    require_kind(spec, ExperimentKind::CorrectorGrowth)?;
    let fields = spec.build_fields()?;
    let max_m = fields.iter().map(|f| f.shape().m).max().unwrap_or(1);
    let cols = columns(max_m);
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = ExperimentReport::new(spec.kind, &col_refs, environment(spec));
    let ncols = cols.len();
    let p = &spec.params;
    let mut ts: Vec<f64> = p.t.iter().flat_map(|t| [*t, 2.0 * t]).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    for field in &fields {
        let sets: Vec<(f64, Result<CorrectorSet, String>)> = ts
            .par_iter()
            .map(|&t| (t, solve(field, t, spec).map_err(|e| e.to_string())))
            .collect();
        let rows: Vec<Row> = p.t.par_iter().map(|&t| growth_row(field, t, &sets, spec, ncols)).collect();
        report.rows.extend(rows);
        let name = &field.name;
        let m = field.shape().m;
        let tvals = report.values(name, "T");
        let levels: Vec<usize> = p.growth_levels.clone().unwrap_or_else(|| (0..=m).collect());
        for l in 0..=m {
            let fit = report.push_fit(
                &format!("growth_l{l}"),
                Series {
                    name: format!("l={l}"),
                    field: name.clone(),
                    xs: tvals.clone(),
                    ys: report.values(name, &format!("grad_l{l}")),
                },
            );
            if levels.contains(&l) {
                let slack = if p.growth_residual_slack { fit.residual.unwrap_or(0.0) } else { 0.0 };
                report.checks.push(exponent_check(
                    &format!("growth_l{l}"),
                    name,
                    &fit,
                    p.max_growth + slack,
                    true,
                    format!("growth exponent of the l={l} corrector norm"),
                ));
            } else if let (Some(theta), Some(e)) = (p.theta_hat, fit.exponent) {
                let reference = (m as f64 - l as f64 - theta).max(0.0);
                report
                    .notes
                    .push(format!("{name}: l={l} growth exponent {e:.4} vs max(0, m-l-theta_hat) = {reference:.4}"));
            }
        }
        let fit = report.push_fit_with(
            "cauchy_decay",
            Series {
                name: "cauchy".into(),
                field: name.clone(),
                xs: tvals.clone(),
                ys: report.values(name, "cauchy_top"),
            },
            CAUCHY_ZERO,
        );
        if let Some(c) = p.cauchy_min_decay {
            report.checks.push(exponent_check(
                "cauchy_decay",
                name,
                &fit,
                c * m as f64,
                false,
                "decay exponent of the top-order distance to the 2T corrector".into(),
            ));
        }
        let worst_mean = report.values(name, "relative_mean").into_iter().fold(0.0, f64::max);
        report
            .checks
            .push(Check::bound("mean_zero", name, worst_mean, p.mean_tol, true, "largest |<chi>| / ||chi||".into()));
    }
    Ok(report)
}

use aphom_core::apfield::CoefficientField;
use aphom_core::corrector::{corrector_grid, gradient_density, solve_approx_corrector};
use aphom_core::discrete::ball_mean;
use rayon::prelude::*;

use super::{corrector_config, environment, require_kind};
use crate::report::{num, Check, CheckStatus, ExperimentReport, FitRecord, FitStatus, Row, RowStatus, Series};
use crate::spec::{ExperimentKind, ExperimentSpec};
use crate::LabError;

const COLUMNS: [&str; 4] = ["T", "center", "r", "profile"];

/// Centres spread along the diagonal of the periodic box.
fn centers(lower: &[f64], extent: f64, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|j| {
            let s = extent * (j as f64 + 0.5) / count as f64;
            lower.iter().map(|a| a + s).collect()
        })
        .collect()
}

pub fn run_holder_profile(spec: &ExperimentSpec) -> Result<ExperimentReport, LabError> {
    require_kind(spec, ExperimentKind::HolderProfile)?;
    let mut report = ExperimentReport::new(spec.kind, &COLUMNS, environment(spec));
    let p = &spec.params;
    let ncols = COLUMNS.len();
    for field in spec.build_fields()? {
        let shape = field.shape();
        for &t in &p.t {
            let key = format!("{} T={t}", field.name);
            let solved = corrector_grid(shape.d, t, p.c_box, p.h)
                .map_err(LabError::from)
                .and_then(|g| Ok(solve_approx_corrector(&field, t, &g, &corrector_config(spec, spec.solver))?));
            let set = match solved {
                Ok(s) => s,
                Err(e) => {
                    report.rows.push(Row::failed(&field.name, format!("T={t}"), ncols, e));
                    continue;
                }
            };
            let dens = gradient_density(&set.chi, shape.m);
            let cs = centers(&set.grid.lower, set.grid.extent(0), p.centers);
            let jobs: Vec<(usize, f64)> = (0..cs.len()).flat_map(|c| p.radii.iter().map(move |r| (c, *r))).collect();
            let rows: Vec<Row> = jobs
                .par_iter()
                .map(|&(c, r)| {
                    let label = format!("T={t} center={c} r={r}");
                    match ball_mean(&set.grid, &dens, &cs[c], r) {
                        Ok(v) => Row {
                            field: field.name.clone(),
                            label,
                            status: RowStatus::Ok,
                            error: None,
                            h: set.grid.h_max(),
                            extent: set.grid.extent(0),
                            rel_tol: spec.solver.rel_tol,
                            values: vec![Some(t), Some(c as f64), Some(r), num(v.max(0.0).sqrt())],
                        },
                        Err(e) => Row::failed(&field.name, label, ncols, e),
                    }
                })
                .collect();
            let ok_rows: Vec<Row> = rows.iter().filter(|r| r.status == RowStatus::Ok).cloned().collect();
            report.rows.extend(rows);
            let mut pooled = Series {
                name: "pooled".into(),
                field: key.clone(),
                xs: Vec::new(),
                ys: Vec::new(),
            };
            for c in 0..cs.len() {
                let (xs, ys): (Vec<f64>, Vec<f64>) = ok_rows
                    .iter()
                    .filter(|r| r.values[1] == Some(c as f64))
                    .filter_map(|r| Some((r.values[2]?, r.values[3]?)))
                    .unzip();
                pooled.xs.extend(&xs);
                pooled.ys.extend(&ys);
                report.push_fit(
                    "profile",
                    Series {
                        name: format!("center {c}"),
                        field: key.clone(),
                        xs,
                        ys,
                    },
                );
            }
            let fit = FitRecord::from_series("sigma", &pooled);
            report.fits.push(fit.clone());
            let threshold = format!("< {}", p.max_sigma);
            let check = match fit.status {
                FitStatus::Degenerate => Check::new("sigma", &key, CheckStatus::Pass, None, threshold, "flat zero profile".into()),
                FitStatus::Inconclusive => Check::new(
                    "sigma",
                    &key,
                    CheckStatus::Inconclusive,
                    fit.exponent.map(|e| -e),
                    threshold,
                    format!("fit residual {:?}", fit.residual),
                ),
                FitStatus::Conclusive => {
                    let sigma = -fit.exponent.unwrap_or(f64::NAN);
                    let status = if sigma < p.max_sigma { CheckStatus::Pass } else { CheckStatus::Fail };
                    Check::new("sigma", &key, status, num(sigma), threshold, format!("fit residual {:.3e}", fit.residual.unwrap_or(0.0)))
                }
            };
            report.checks.push(check);
            if let Some(bound) = p.center_factor {
                let mut worst: f64 = 1.0;
                for &r in &p.radii {
                    let vals: Vec<f64> = ok_rows.iter().filter(|row| row.values[2] == Some(r)).filter_map(|row| row.values[3]).collect();
                    let hi = vals.iter().cloned().fold(0.0, f64::max);
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    if hi > 0.0 {
                        worst = worst.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
                    }
                }
                report.checks.push(Check::bound(
                    "center_factor",
                    &key,
                    worst,
                    bound,
                    true,
                    "largest max/min ratio of the profile across centres at equal r".into(),
                ));
            }
        }
    }
    Ok(report)
}

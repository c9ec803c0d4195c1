use aphom_core::apfield::{CoefficientField, RhoSource, RHO_ZERO};
use rayon::prelude::*;

use super::{environment, fmt_label, require_kind, sampler};
use crate::report::{num, Check, CheckStatus, ExperimentReport, FitStatus, Row, RowStatus, Series};
use crate::spec::{ExperimentKind, ExperimentSpec};
use crate::LabError;

const COLUMNS: [&str; 3] = ["k", "L", "rho"];

struct Source<'a> {
    name: String,
    m: Option<usize>,
    rho: &'a dyn RhoSource,
    theta_true: Option<f64>,
}

pub fn run_rho_decay(spec: &ExperimentSpec) -> Result<ExperimentReport, LabError> {
    require_kind(spec, ExperimentKind::RhoDecay)?;
    let mut report = ExperimentReport::new(spec.kind, &COLUMNS, environment(spec));
    let fields = spec.build_fields()?;
    let mut sources: Vec<Source> = fields
        .iter()
        .map(|f| Source {
            name: f.name.clone(),
            m: Some(f.shape().m),
            rho: f as &dyn RhoSource,
            theta_true: None,
        })
        .collect();
    if let Some(s) = &spec.synthetic {
        sources.push(Source {
            name: "synthetic".into(),
            m: None,
            rho: s,
            theta_true: Some(s.theta),
        });
    }
    let p = &spec.params;
    let cfg = sampler(spec);
    let jobs: Vec<(usize, f64)> = (0..sources.len()).flat_map(|s| p.l.iter().map(move |l| (s, *l))).collect();
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(s, l)| {
            let src = &sources[s];
            let label = fmt_label("L", l);
            match src.rho.rho(p.k, l, l, p.p, &cfg) {
                Ok(v) => Row {
                    field: src.name.clone(),
                    label,
                    status: RowStatus::Ok,
                    error: None,
                    h: 0.0,
                    extent: l,
                    rel_tol: spec.solver.rel_tol,
                    values: vec![Some(p.k as f64), Some(l), num(v)],
                },
                Err(e) => Row::failed(&src.name, label, COLUMNS.len(), e),
            }
        })
        .collect();
    report.rows.extend(rows);
    for src in &sources {
        let ls = report.values(&src.name, "L");
        let rho = report.values(&src.name, "rho");
        let fit = report.push_fit(
            "rho_decay",
            Series {
                name: format!("rho_{}", p.k),
                field: src.name.clone(),
                xs: ls,
                ys: rho.clone(),
            },
        );
        if rho.iter().all(|r| *r <= RHO_ZERO) {
            report.checks.push(Check::new(
                "rho_vanishes",
                &src.name,
                CheckStatus::Pass,
                num(rho.iter().cloned().fold(0.0, f64::max)),
                format!("<= {RHO_ZERO}"),
                "theta = inf sentinel".into(),
            ));
            report.notes.push(format!("{}: theta_hat = inf", src.name));
            continue;
        }
        let theta = fit.exponent.map(|e| -e);
        if let Some(t) = src.theta_true {
            let dev = theta.map(|th| (th - t).abs()).unwrap_or(f64::INFINITY);
            report.checks.push(Check::bound(
                "synthetic_recovery",
                &src.name,
                dev,
                p.theta_tol,
                true,
                format!("|theta_hat - {t}|"),
            ));
            continue;
        }
        let status = match (fit.status, theta) {
            (FitStatus::Conclusive, Some(th)) if th.is_finite() => CheckStatus::Pass,
            _ => CheckStatus::Inconclusive,
        };
        report.checks.push(Check::new(
            "theta_finite",
            &src.name,
            status,
            theta,
            "finite, residual <= 0.2".into(),
            format!("fit residual {:?}", fit.residual),
        ));
        if let (Some(th), Some(m)) = (theta, src.m) {
            let flag = if th > m as f64 { "exceeds" } else { "does not exceed" };
            report
                .notes
                .push(format!("{}: theta_hat = {th:.4} (residual {:?}) {flag} m = {m}", src.name, fit.residual));
        }
    }
    Ok(report)
}

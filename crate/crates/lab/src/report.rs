use aphom_core::fit::{power_law, PowerLawFit};
use serde::{Deserialize, Serialize};

use crate::spec::ExperimentKind;

/// Version of the CSV/JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest value of a fitted series still treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
    Inconclusive,
}

/// One parameter point of a sweep; `values` follows [`ExperimentReport::columns`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub field: String,
    pub label: String,
    pub status: RowStatus,
    pub error: Option<String>,
    pub h: f64,
    pub extent: f64,
    pub rel_tol: f64,
    pub values: Vec<Option<f64>>,
}

impl Row {
    pub fn failed(field: &str, label: String, ncols: usize, err: impl std::fmt::Display) -> Row {
        Row {
            field: field.to_string(),
            label,
            status: RowStatus::Failed,
            error: Some(err.to_string()),
            h: 0.0,
            extent: 0.0,
            rel_tol: 0.0,
            values: vec![None; ncols],
        }
    }
}

/// Non-finite numbers are stored as missing so JSON round-trips exactly.
pub fn num(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub field: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Conclusive,
    /// Residual above the acceptance bound or too few points.
    Inconclusive,
    /// Every value below [`DEGENERATE_TOL`]; no exponent.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub name: String,
    pub field: String,
    /// Name of the plotted series the fit was taken from.
    pub series: String,
    pub exponent: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    pub points: usize,
    pub status: FitStatus,
}

impl FitRecord {
    /// Power-law fit of `s` over values above [`DEGENERATE_TOL`].
    pub fn from_series(name: &str, s: &Series) -> FitRecord {
        Self::from_series_with(name, s, DEGENERATE_TOL)
    }

    /// Power-law fit of `s` over values above `zero_tol`.
    pub fn from_series_with(name: &str, s: &Series, zero_tol: f64) -> FitRecord {
        let degenerate = s.ys.iter().all(|y| y.abs() <= zero_tol);
        let (xs, ys): (Vec<f64>, Vec<f64>) = s
            .xs
            .iter()
            .zip(&s.ys)
            .filter(|(x, y)| **x > 0.0 && **y > zero_tol && y.is_finite())
            .map(|(x, y)| (*x, *y))
            .unzip();
        let fit = if degenerate { None } else { power_law(&xs, &ys).ok() };
        let status = match (&fit, degenerate) {
            (_, true) => FitStatus::Degenerate,
            (Some(f), _) if f.is_conclusive() && xs.len() >= 3 => FitStatus::Conclusive,
            _ => FitStatus::Inconclusive,
        };
        FitRecord {
            name: name.to_string(),
            field: s.field.clone(),
            series: s.name.clone(),
            exponent: fit.map(|f| f.exponent),
            intercept: fit.map(|f| f.intercept),
            residual: fit.map(|f| f.residual),
            points: xs.len(),
            status,
        }
    }

    pub fn power_law(&self) -> Option<PowerLawFit> {
        Some(PowerLawFit {
            exponent: self.exponent?,
            intercept: self.intercept?,
            residual: self.residual?,
            points: self.points,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub field: String,
    pub status: CheckStatus,
    pub value: Option<f64>,
    pub threshold: String,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, field: &str, status: CheckStatus, value: Option<f64>, threshold: String, detail: String) -> Check {
        Check {
            name: name.to_string(),
            field: field.to_string(),
            status,
            value,
            threshold,
            detail,
        }
    }

    /// `value ≤ bound` (or `≥` when `upper` is false).
    pub fn bound(name: &str, field: &str, value: f64, bound: f64, upper: bool, detail: String) -> Check {
        let ok = if upper { value <= bound } else { value >= bound };
        let status = if value.is_nan() {
            CheckStatus::Inconclusive
        } else if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        let op = if upper { "<=" } else { ">=" };
        Check::new(name, field, status, num(value), format!("{op} {bound}"), detail)
    }
}

/// Run parameters that determine the numbers in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub seed: u64,
    pub rel_tol: f64,
    pub preconditioner: String,
    pub c_box: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub series: Vec<Series>,
    pub fits: Vec<FitRecord>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub environment: Environment,
}

impl ExperimentReport {
    pub fn new(kind: ExperimentKind, columns: &[&str], environment: Environment) -> Self {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            kind,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            series: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            environment,
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of column `name` in rows of `field` with status `Ok`.
    pub fn values(&self, field: &str, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .filter(|r| r.field == field && r.status == RowStatus::Ok)
            .filter_map(|r| r.values[c])
            .collect()
    }

    pub fn checks_named(&self, name: &str) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.name == name).collect()
    }

    pub fn fit(&self, name: &str, field: &str) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.name == name && f.field == field)
    }

    /// Adds `series` and its power-law fit under `fit_name`.
    pub fn push_fit(&mut self, fit_name: &str, series: Series) -> FitRecord {
        self.push_fit_with(fit_name, series, DEGENERATE_TOL)
    }

    pub fn push_fit_with(&mut self, fit_name: &str, series: Series, zero_tol: f64) -> FitRecord {
        let rec = FitRecord::from_series_with(fit_name, &series, zero_tol);
        self.series.push(series);
        self.fits.push(rec.clone());
        rec
    }

    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.status == RowStatus::Failed)
            || self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn inconclusive(&self) -> bool {
        self.rows.iter().any(|r| r.status == RowStatus::Inconclusive)
            || self.checks.iter().any(|c| c.status == CheckStatus::Inconclusive)
    }

    /// 0 when every check passes, 1 on any failure, 2 when only inconclusive.
    pub fn exit_code(&self) -> i32 {
        if self.failed() {
            1
        } else if self.inconclusive() {
            2
        } else {
            0
        }
    }
}

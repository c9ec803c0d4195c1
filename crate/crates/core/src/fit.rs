//! Ordinary least-squares power-law fits on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fits above this RMS log-residual are not trusted by acceptance logic.
pub const MAX_FIT_RESIDUAL: f64 = 0.2;

/// `y ≈ exp(intercept) · x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square of the residuals of `ln y`.
    pub residual: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn is_conclusive(&self) -> bool {
        self.residual.is_finite() && self.residual <= MAX_FIT_RESIDUAL
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.exponent * x.ln()).exp()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch(format!("{} abscissae vs {} values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("power-law fit needs at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("power-law fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("abscissae must not all coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(PowerLawFit {
        exponent: slope,
        intercept,
        residual: (ss / n).sqrt(),
        points: xs.len(),
    })
}

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::approx::{
    gradient_density, solve_approx_corrector, solve_approx_corrector_shifted, CorrectorConfig, CorrectorSet,
};
use crate::apfield::CoefficientField;
use crate::discrete::{
    sample_on_grid, solve_spd_with, windowed_lp, windowed_mean_max, CenterRegion, EllipticOperator, Grid, GridField,
    LinearOperator,
};
use crate::error::{Error, Result};

/// Ratios below this right-hand side are reported as exact-translation pairs.
pub const MIN_TRANSLATION_RHS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationPair {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `Σ_k T^{−m+k} ‖Δ_{yz} ∇^k χ_T‖_{S²_T}`
    pub lhs: f64,
    /// `‖Δ_{yz} A‖_{S^p_T}` on the grid.
    pub rhs: f64,
    /// `None` when `rhs` is below [`MIN_TRANSLATION_RHS`].
    pub ratio: Option<f64>,
}

/// Window centres at least `r` away from the ends of a periodic box.
fn interior_region(grid: &Grid, r: f64) -> Option<CenterRegion> {
    let lower: Vec<f64> = grid.lower.iter().map(|l| l + r).collect();
    let upper: Vec<f64> = (0..grid.d()).map(|k| grid.lower[k] + grid.extent(k) - r).collect();
    if lower.iter().zip(&upper).all(|(a, b)| a < b) {
        Some(CenterRegion { lower, upper })
    } else {
        None
    }
}

/// Compares correctors of `A(· + y)` and `A(· + z)` on one grid with window radius `T`.
pub fn translation_sensitivity(
    field: &dyn CoefficientField,
    t: f64,
    grid: &Grid,
    pairs: &[(Vec<f64>, Vec<f64>)],
    p: f64,
    cfg: &CorrectorConfig,
) -> Result<Vec<TranslationPair>> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent p must be finite and ≥ 1, got {p}")));
    }
    let m = field.shape().m;
    let region = interior_region(grid, t);
    pairs
        .par_iter()
        .map(|(y, z)| {
            if y.len() != grid.d() || z.len() != grid.d() {
                return Err(Error::ShapeMismatch("translation vector dimension".into()));
            }
            let ay = sample_on_grid(field, grid, 1.0, y)?;
            let az = sample_on_grid(field, grid, 1.0, z)?;
            let tl = ay.tensor_len();
            let diff: Vec<f64> = ay.values.iter().zip(&az.values).map(|(a, b)| a - b).collect();
            let da = GridField::from_values(grid, tl, diff)?;
            let rhs = windowed_lp(&da, p, t, region.as_ref())?;
            if rhs < MIN_TRANSLATION_RHS {
                return Ok(TranslationPair {
                    y: y.clone(),
                    z: z.clone(),
                    lhs: 0.0,
                    rhs,
                    ratio: None,
                });
            }
            let sy = solve_approx_corrector_shifted(field, t, grid, y, cfg)?;
            let sz = solve_approx_corrector_shifted(field, t, grid, z, cfg)?;
            let dchi = difference(&sy.chi, &sz.chi)?;
            let mut lhs = 0.0;
            for k in 0..=m {
                let dens = gradient_density(&dchi, k);
                let nrm = windowed_mean_max(grid, &dens, t, region.as_ref())?.max(0.0).sqrt();
                lhs += t.powi(k as i32 - m as i32) * nrm;
            }
            Ok(TranslationPair {
                y: y.clone(),
                z: z.clone(),
                lhs,
                rhs,
                ratio: Some(lhs / rhs),
            })
        })
        .collect()
}

fn difference(a: &[GridField], b: &[GridField]) -> Result<Vec<GridField>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let v = x.values.iter().zip(&y.values).map(|(p, q)| p - q).collect();
            GridField::from_values(&x.grid, x.ncomp, v)
        })
        .collect()
}

/// `max/min` over the defined ratios (`None` with fewer than two).
pub fn ratio_spread(pairs: &[TranslationPair]) -> Option<f64> {
    let r: Vec<f64> = pairs.iter().filter_map(|p| p.ratio).collect();
    if r.len() < 2 {
        return None;
    }
    let max = r.iter().cloned().fold(f64::MIN, f64::max);
    let min = r.iter().cloned().fold(f64::MAX, f64::min);
    Some(max / min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyDistance {
    pub t1: f64,
    pub t2: f64,
    /// `‖∇^m(χ_{T1} − χ_{T2})‖_{S²_1}`
    pub top: f64,
    /// `‖χ_{T1} − χ_{T2}‖_{S²_1}`
    pub zeroth: f64,
}

/// Distance between the correctors at `T1` and `T2` on a shared grid.
pub fn cauchy_distance(
    field: &dyn CoefficientField,
    t1: f64,
    t2: f64,
    grid: &Grid,
    cfg: &CorrectorConfig,
) -> Result<CauchyDistance> {
    let set = solve_approx_corrector(field, t2, grid, cfg)?;
    cauchy_distance_from(&set, t1, cfg)
}

/// As [`cauchy_distance`], reusing the solved set at `T2 = set.t`.
///
/// The difference `d = χ_{T1} − χ_{T2}` solves `(L + τ_1) d = (τ_2 − τ_1) χ_{T2}`,
/// which avoids cancellation between two independently converged solves.
pub fn cauchy_distance_from(set: &CorrectorSet, t1: f64, cfg: &CorrectorConfig) -> Result<CauchyDistance> {
    let m = set.shape.m;
    let tau1 = crate::discrete::mass_term(t1, m)?;
    let op = EllipticOperator::new(&set.grid, &set.coeff, tau1)?;
    let pc = op.preconditioner(cfg.solver.preconditioner)?;
    let dtau = set.tau - tau1;
    let diffs: Vec<Result<GridField>> = set
        .chi
        .par_iter()
        .map(|chi| {
            let rhs: Vec<f64> = chi.values.iter().map(|v| dtau * v).collect();
            if rhs.iter().all(|v| *v == 0.0) {
                return Ok(GridField::zeros(&set.grid, chi.ncomp));
            }
            let (x, _) = solve_spd_with(&op, pc.as_ref(), &rhs, &cfg.solver)?;
            GridField::from_values(&set.grid, chi.ncomp, x)
        })
        .collect();
    let diffs = diffs.into_iter().collect::<Result<Vec<_>>>()?;
    let top = windowed_mean_max(&set.grid, &gradient_density(&diffs, m), 1.0, None)?.max(0.0).sqrt();
    let zeroth = windowed_mean_max(&set.grid, &gradient_density(&diffs, 0), 1.0, None)?.max(0.0).sqrt();
    Ok(CauchyDistance {
        t1,
        t2: set.t,
        top,
        zeroth,
    })
}

/// Metadata written next to optional per-column field dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub field: String,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub t: f64,
    pub tau: f64,
    pub grid: Grid,
    pub indices: Vec<String>,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    pub relative_mean: f64,
    /// File names of the column dumps, `chi_<γ>_<l>.csv`.
    pub files: Vec<String>,
}

/// Writes `metadata.json` and, with `dump_fields`, one CSV per corrector column.
pub fn export_bundle(set: &CorrectorSet, dir: &Path, dump_fields: bool) -> Result<BundleMetadata> {
    fs::create_dir_all(dir)?;
    let indices = set.indices();
    let n = set.shape.n;
    let mut files = Vec::new();
    if dump_fields {
        for (g, gamma) in indices.iter().enumerate() {
            for l in 0..n {
                let name = format!("chi_{}_{}.csv", gamma.entries().iter().map(|e| e.to_string()).collect::<Vec<_>>().join("-"), l);
                set.column(g, l).write_csv(&dir.join(&name))?;
                files.push(name);
            }
        }
    }
    let meta = BundleMetadata {
        field: set.field_name.clone(),
        d: set.shape.d,
        m: set.shape.m,
        n,
        t: set.t,
        tau: set.tau,
        grid: set.grid.clone(),
        indices: indices.iter().map(|a| a.to_string()).collect(),
        residuals: set.reports.iter().map(|r| r.residual).collect(),
        iterations: set.reports.iter().map(|r| r.iterations).collect(),
        relative_mean: set.relative_mean(),
        files,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("metadata.json"), json)?;
    Ok(meta)
}

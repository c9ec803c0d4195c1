use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apfield::{multi_indices, CoefficientField, FieldShape, MultiIndex};
use crate::discrete::diff::{dalpha_into, Variant};
use crate::discrete::{
    grid_norm, gradient_sq, mass_term, sample_on_grid, solve_spd_with, windowed_mean_max, CenterRegion,
    EllipticOperator, Grid, GridField, LinearOperator, NormKind, SampledCoeff, SolveReport, SolverConfig,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectorConfig {
    pub solver: SolverConfig,
    /// Box side as a multiple of `T`.
    pub c_box: f64,
    /// Admissible `|⟨χ_T⟩|` relative to `‖χ_T‖_{L²}`.
    pub mean_tol: f64,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        CorrectorConfig {
            solver: SolverConfig::default(),
            c_box: 8.0,
            mean_tol: 1e-7,
        }
    }
}

/// Periodic box of side `c_box · T` with spacing as close to `h` as the node count allows.
pub fn corrector_grid(d: usize, t: f64, c_box: f64, h: f64) -> Result<Grid> {
    if !(t > 0.0 && t.is_finite() && c_box > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument(format!("bad corrector grid request T={t}, c_box={c_box}, h={h}")));
    }
    let extent = c_box * t;
    let n = (extent / h).round().max(2.0) as usize;
    Grid::torus(d, extent, n)
}

/// Approximate correctors `χ_T^{γ, l}` for every `|γ| = m` and column `l`.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    pub field_name: String,
    pub shape: FieldShape,
    pub t: f64,
    pub tau: f64,
    pub grid: Grid,
    pub coeff: SampledCoeff,
    /// Column `g · n + l` holds `χ^{γ_g}_{·l}` (n components).
    pub chi: Vec<GridField>,
    pub reports: Vec<SolveReport>,
    /// `‖rhs‖` of each corrector system (Euclidean over nodes).
    pub rhs_norms: Vec<f64>,
    pub solver: SolverConfig,
    pub mean_tol: f64,
}

impl CorrectorSet {
    pub fn indices(&self) -> Vec<MultiIndex> {
        multi_indices(self.shape.d, self.shape.m)
    }

    pub fn column(&self, g: usize, l: usize) -> &GridField {
        &self.chi[g * self.shape.n + l]
    }

    pub fn columns(&self) -> usize {
        self.chi.len()
    }

    /// `max_c |⟨χ_c⟩| / ‖χ_c‖_{L²}` (zero for vanishing correctors).
    pub fn relative_mean(&self) -> f64 {
        self.chi
            .iter()
            .map(|c| {
                let m = c.mean().iter().fold(0.0, |a: f64, v| a.max(v.abs()));
                let nrm = grid_norm(c, NormKind::L2).unwrap_or(0.0);
                if m == 0.0 {
                    0.0
                } else {
                    m / nrm
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn mean_ok(&self) -> bool {
        self.relative_mean() <= self.mean_tol
    }

    pub fn max_residual(&self) -> f64 {
        self.reports.iter().fold(0.0, |m, r| m.max(r.residual))
    }

    pub fn total_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).sum()
    }
}

/// `(−1)^{m+1} Σ_α B^α(A^{αγ}_{·l})`, the weak form of `−L_1 P^γ_l`.
pub(crate) fn corrector_rhs(coeff: &SampledCoeff, grid: &Grid, g: usize, l: usize) -> Vec<f64> {
    let shape = coeff.shape;
    let (n, na) = (shape.n, shape.na());
    let t = coeff.tensor_len();
    let len = grid.len() * n;
    let indices = multi_indices(shape.d, shape.m);
    let mut rhs = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut out = vec![0.0; len];
    let mut scratch = vec![0.0; len];
    let sign = if shape.m.is_multiple_of(2) { -1.0 } else { 1.0 };
    for (a, alpha) in indices.iter().enumerate() {
        for node in 0..grid.len() {
            for i in 0..n {
                w[node * n + i] = coeff.values[node * t + ((a * na + g) * n + i) * n + l];
            }
        }
        dalpha_into(grid, n, alpha, Variant::Backward, &w, &mut out, &mut scratch);
        for (r, v) in rhs.iter_mut().zip(&out) {
            *r += sign * v;
        }
    }
    if grid.is_periodic() {
        // the exact mean of a discrete divergence is zero; drop the roundoff part
        let mut means = vec![0.0; n];
        for chunk in rhs.chunks(n) {
            for (m, v) in means.iter_mut().zip(chunk) {
                *m += v;
            }
        }
        let nodes = grid.len() as f64;
        for chunk in rhs.chunks_mut(n) {
            for (v, m) in chunk.iter_mut().zip(&means) {
                *v -= m / nodes;
            }
        }
    }
    rhs
}

/// Solves the corrector systems for `field` sampled at `x + offset` on `grid`.
pub fn solve_approx_corrector(
    field: &dyn CoefficientField,
    t: f64,
    grid: &Grid,
    cfg: &CorrectorConfig,
) -> Result<CorrectorSet> {
    solve_approx_corrector_shifted(field, t, grid, &vec![0.0; grid.d()], cfg)
}

pub fn solve_approx_corrector_shifted(
    field: &dyn CoefficientField,
    t: f64,
    grid: &Grid,
    offset: &[f64],
    cfg: &CorrectorConfig,
) -> Result<CorrectorSet> {
    let coeff = sample_on_grid(field, grid, 1.0, offset)?;
    solve_corrector_sampled(field.name(), coeff, t, cfg)
}

/// Corrector solve on already-sampled coefficients (periodic grid).
pub fn solve_corrector_sampled(name: &str, coeff: SampledCoeff, t: f64, cfg: &CorrectorConfig) -> Result<CorrectorSet> {
    let grid = coeff.grid.clone();
    if !grid.is_periodic() {
        return Err(Error::GridIncompatible("corrector solves need a periodic grid".into()));
    }
    coeff.require_admissible()?;
    let shape = coeff.shape;
    let tau = mass_term(t, shape.m)?;
    let op = EllipticOperator::new(&grid, &coeff, tau)?;
    let pc = op.preconditioner(cfg.solver.preconditioner)?;
    let na = shape.na();
    let n = shape.n;
    let results: Vec<Result<(GridField, SolveReport, f64)>> = (0..na * n)
        .into_par_iter()
        .map(|col| {
            let (g, l) = (col / n, col % n);
            let rhs = corrector_rhs(&coeff, &grid, g, l);
            let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let (x, rep) = solve_spd_with(&op, pc.as_ref(), &rhs, &cfg.solver)?;
            Ok((GridField::from_values(&grid, n, x)?, rep, norm))
        })
        .collect();
    drop(pc);
    let mut chi = Vec::with_capacity(na * n);
    let mut reports = Vec::with_capacity(na * n);
    let mut rhs_norms = Vec::with_capacity(na * n);
    for r in results {
        let (c, rep, nrm) = r?;
        chi.push(c);
        reports.push(rep);
        rhs_norms.push(nrm);
    }
    Ok(CorrectorSet {
        field_name: name.to_string(),
        shape,
        t,
        tau,
        grid,
        coeff,
        chi,
        reports,
        rhs_norms,
        solver: cfg.solver,
        mean_tol: cfg.mean_tol,
    })
}

/// Grid averages `⟨χ^{γ,l}_i⟩`, indexed `[column][component]`.
pub fn corrector_mean(set: &CorrectorSet) -> Vec<Vec<f64>> {
    set.chi.iter().map(|c| c.mean()).collect()
}

/// Per-node `Σ_{γ,l} |∇^k χ^{γ,l}|²`.
pub fn gradient_density(chi: &[GridField], k: usize) -> Vec<f64> {
    let mut acc = vec![0.0; chi[0].grid.len()];
    for c in chi {
        for (a, v) in acc.iter_mut().zip(gradient_sq(c, k)) {
            *a += v;
        }
    }
    acc
}

/// `‖∇^k χ_T‖_{S^2_R}` for each `R`, all corrector columns together.
pub fn corrector_norm_profile(set: &CorrectorSet, k: usize, radii: &[f64]) -> Result<Vec<f64>> {
    let dens = gradient_density(&set.chi, k);
    radii
        .iter()
        .map(|&r| Ok(windowed_mean_max(&set.grid, &dens, r, None)?.sqrt()))
        .collect()
}

/// Same as [`corrector_norm_profile`] restricted to window centres in `region`.
pub fn corrector_norm_profile_in(set: &CorrectorSet, k: usize, radii: &[f64], region: &CenterRegion) -> Result<Vec<f64>> {
    let dens = gradient_density(&set.chi, k);
    radii
        .iter()
        .map(|&r| Ok(windowed_mean_max(&set.grid, &dens, r, Some(region))?.sqrt()))
        .collect()
}

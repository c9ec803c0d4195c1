use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::approx::CorrectorSet;
use super::homogenized::FluxTensor;
use crate::apfield::{multi_indices, FieldShape, MultiIndex};
use crate::discrete::diff::{dalpha_into, Variant};
use crate::discrete::{mass_term, solve_spd_with, Grid, LinearOperator, PolyharmonicOperator, SolveReport, SolverConfig};
use crate::error::{Error, Result};

/// Dual correctors `φ^{αβ}_{ij}` and potentials `h^β_{ij} = Σ_α B^α φ^{αβ}_{ij}`.
#[derive(Debug, Clone)]
pub struct DualCorrectorSet {
    pub shape: FieldShape,
    pub grid: Grid,
    pub t: f64,
    pub tau: f64,
    /// Scalar node arrays in `(α, β, i, j)` row-major order.
    pub phi: Vec<Vec<f64>>,
    /// Scalar node arrays in `(β, i, j)` row-major order.
    pub h: Vec<Vec<f64>>,
    pub reports: Vec<SolveReport>,
}

impl DualCorrectorSet {
    fn phi_index(&self, a: usize, b: usize, i: usize, j: usize) -> usize {
        let (na, n) = (self.shape.na(), self.shape.n);
        ((a * na + b) * n + i) * n + j
    }

    pub fn phi_entry(&self, a: usize, b: usize, i: usize, j: usize) -> &[f64] {
        &self.phi[self.phi_index(a, b, i, j)]
    }

    pub fn h_entry(&self, b: usize, i: usize, j: usize) -> &[f64] {
        let n = self.shape.n;
        &self.h[(b * n + i) * n + j]
    }

    /// Grid mean of every `φ` entry.
    pub fn phi_means(&self) -> Vec<f64> {
        self.phi
            .iter()
            .map(|p| p.iter().sum::<f64>() / p.len() as f64)
            .collect()
    }

    /// `B^γ φ^{αβ}_{ij} − B^α φ^{γβ}_{ij}` for multi-index slots `γ`, `α`.
    pub fn skew(&self, g: usize, a: usize, b: usize, i: usize, j: usize) -> Vec<f64> {
        let idx = multi_indices(self.shape.d, self.shape.m);
        let d1 = backward(&self.grid, &idx[g], self.phi_entry(a, b, i, j));
        let d2 = backward(&self.grid, &idx[a], self.phi_entry(g, b, i, j));
        d1.iter().zip(&d2).map(|(x, y)| x - y).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.reports.iter().fold(0.0, |m, r| m.max(r.residual))
    }
}

fn backward(grid: &Grid, alpha: &MultiIndex, u: &[f64]) -> Vec<f64> {
    diff(grid, alpha, u, Variant::Backward)
}

fn diff(grid: &Grid, alpha: &MultiIndex, u: &[f64], v: Variant) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    let mut scratch = vec![0.0; u.len()];
    dalpha_into(grid, 1, alpha, v, u, &mut out, &mut scratch);
    out
}

/// Solves `((−Δ_h)^m + T^{−2m}) φ^{αβ}_{ij} = B^{αβ}_{ij} − ⟨B^{αβ}_{ij}⟩` entrywise.
pub fn solve_dual_corrector(flux: &FluxTensor, t: f64, solver: &SolverConfig) -> Result<DualCorrectorSet> {
    let shape = flux.shape;
    let grid = &flux.grid;
    let tau = mass_term(t, shape.m)?;
    let op = PolyharmonicOperator::new(grid, shape.m, tau, 1)?;
    let pc = op.preconditioner(solver.preconditioner)?;
    let (na, n) = (shape.na(), shape.n);
    let entries: Vec<(usize, usize, usize, usize)> = (0..na)
        .flat_map(|a| (0..na).flat_map(move |b| (0..n).flat_map(move |i| (0..n).map(move |j| (a, b, i, j)))))
        .collect();
    let solved: Vec<Result<(Vec<f64>, SolveReport)>> = entries
        .par_iter()
        .map(|&(a, b, i, j)| {
            let mut rhs = flux.entry(a, b, i, j);
            let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
            rhs.iter_mut().for_each(|v| *v -= mean);
            solve_spd_with(&op, pc.as_ref(), &rhs, solver)
        })
        .collect();
    let mut phi = Vec::with_capacity(entries.len());
    let mut reports = Vec::with_capacity(entries.len());
    for s in solved {
        let (x, r) = s?;
        phi.push(x);
        reports.push(r);
    }
    let idx = multi_indices(shape.d, shape.m);
    let mut h = Vec::with_capacity(na * n * n);
    for b in 0..na {
        for i in 0..n {
            for j in 0..n {
                let mut acc = vec![0.0; grid.len()];
                for (a, al) in idx.iter().enumerate() {
                    let d = backward(grid, al, &phi[((a * na + b) * n + i) * n + j]);
                    acc.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
                }
                h.push(acc);
            }
        }
    }
    Ok(DualCorrectorSet {
        shape,
        grid: grid.clone(),
        t,
        tau,
        phi,
        h,
        reports,
    })
}

/// Outcome of the discrete flux-divergence identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxCheck {
    /// `‖Σ_α D^α B^{αβ}_{·j} − (−1)^{m+1} τ χ^{β,j}‖ / ‖rhs_{β,j}‖` per column.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub variant: Variant,
}

/// Evaluates `Σ_α D^α B^{αβ}_{ij} = (−1)^{m+1} T^{−2m} χ^{β,j}_i` with `D = B`
/// (the assembly adjoint) or `D = F` (mismatched control).
pub fn flux_divergence_check(flux: &FluxTensor, set: &CorrectorSet, variant: Variant) -> Result<FluxCheck> {
    let shape = set.shape;
    if flux.shape != shape || !flux.grid.same_shape(&set.grid) {
        return Err(Error::ShapeMismatch("flux and corrector set differ".into()));
    }
    let (na, n) = (shape.na(), shape.n);
    let idx = multi_indices(shape.d, shape.m);
    let sign = if shape.m.is_multiple_of(2) { -1.0 } else { 1.0 };
    let nodes = set.grid.len();
    let mut residuals = Vec::with_capacity(na * n);
    for b in 0..na {
        for j in 0..n {
            let col = b * n + j;
            let chi = &set.chi[col];
            let mut ss = 0.0;
            for i in 0..n {
                let mut div = vec![0.0; nodes];
                for (a, al) in idx.iter().enumerate() {
                    let d = diff(&set.grid, al, &flux.entry(a, b, i, j), variant);
                    div.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
                }
                for (node, v) in div.iter().enumerate() {
                    let target = sign * set.tau * chi.values[node * n + i];
                    ss += (v - target).powi(2);
                }
            }
            let num = ss.sqrt();
            let den = set.rhs_norms[col];
            residuals.push(if num == 0.0 { 0.0 } else { num / den.max(f64::MIN_POSITIVE) });
        }
    }
    let max_residual = residuals.iter().fold(0.0, |m: f64, v| m.max(*v));
    Ok(FluxCheck {
        residuals,
        max_residual,
        variant,
    })
}

use serde::{Deserialize, Serialize};

use super::problem::BoxDomain;
use super::smoothing::{k_eps_delta, SmoothingConfig};
use crate::corrector::CorrectorSet;
use crate::discrete::{apply_dalpha, grid_norm, Grid, GridField, NormKind, Variant};
use crate::error::{Error, Result};

/// Periodic corrector grid whose nodes are the box nodes scaled by `1/ε`.
///
/// Spacing `h/ε` and side the first whole number `≥ c_box · T` rounded to the
/// node spacing; the scaled box sits in the middle of the torus, shifted from
/// `lower/ε` by a whole number of nodes.
pub fn two_scale_corrector_grid(dom: &BoxDomain, eps: f64, t: f64, c_box: f64) -> Result<Grid> {
    if !(eps > 0.0 && t > 0.0 && t.is_finite() && c_box > 0.0) {
        return Err(Error::InvalidArgument(format!("bad two-scale grid request ε={eps}, T={t}, c_box={c_box}")));
    }
    let side = (c_box * t).ceil();
    let box_grid = dom.grid()?;
    let mut extent = Vec::with_capacity(dom.d());
    let mut n = Vec::with_capacity(dom.d());
    let mut lower = Vec::with_capacity(dom.d());
    for k in 0..dom.d() {
        let hc = box_grid.h[k] / eps;
        let nk = (side / hc).round().max(2.0) as usize;
        let margin = nk.saturating_sub(box_grid.dims[k]) / 2;
        n.push(nk);
        extent.push(nk as f64 * hc);
        lower.push(dom.lower[k] / eps - margin as f64 * hc);
    }
    Grid::periodic(lower, extent, n)
}

/// Corrector node index shift per axis, or `GridIncompatible`.
fn node_shift(box_grid: &Grid, cgrid: &Grid, eps: f64) -> Result<Vec<isize>> {
    if !cgrid.is_periodic() || cgrid.d() != box_grid.d() {
        return Err(Error::GridIncompatible("corrector grid must be periodic with the box dimension".into()));
    }
    (0..box_grid.d())
        .map(|k| {
            let hc = box_grid.h[k] / eps;
            if (cgrid.h[k] - hc).abs() > 1e-9 * hc {
                return Err(Error::GridIncompatible(format!(
                    "corrector spacing {} differs from h/ε = {hc} on axis {k}",
                    cgrid.h[k]
                )));
            }
            let s = (box_grid.lower[k] / eps - cgrid.lower[k]) / hc;
            if (s - s.round()).abs() > 1e-6 {
                return Err(Error::GridIncompatible(format!("box corner does not map to a corrector node on axis {k}")));
            }
            Ok(s.round() as isize)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleError {
    /// `u_ε − u_0 − ε^m Σ_γ χ^γ_T(x/ε) K_{ε,δ}(D^γ u_0)`
    pub omega: GridField,
    pub norms: TwoScaleNorms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleNorms {
    pub omega_l2: f64,
    pub omega_hm1: f64,
    pub omega_hm: f64,
    pub diff_l2: f64,
    pub diff_hm1: f64,
    pub diff_hm: f64,
}

/// Assembles the corrected error on the box and its discrete norms.
pub fn two_scale_error(
    u_eps: &GridField,
    u0: &GridField,
    set: &CorrectorSet,
    scfg: &SmoothingConfig,
    dom: &BoxDomain,
) -> Result<TwoScaleError> {
    let grid = dom.grid()?;
    if !u_eps.grid.same_shape(&grid) || !u0.grid.same_shape(&grid) || u_eps.ncomp != u0.ncomp {
        return Err(Error::ShapeMismatch("solutions are not on the domain grid".into()));
    }
    let shape = set.shape;
    let (m, n) = (shape.m, shape.n);
    if u0.ncomp != n || shape.d != dom.d() {
        return Err(Error::ShapeMismatch("corrector set does not match the problem".into()));
    }
    let eps = scfg.eps;
    let shift = node_shift(&grid, &set.grid, eps)?;
    let d = grid.d();
    // box node -> corrector node
    let mut multi = vec![0; d];
    let mut cm = vec![0; d];
    let map: Vec<usize> = (0..grid.len())
        .map(|idx| {
            grid.unravel(idx, &mut multi);
            for k in 0..d {
                cm[k] = (multi[k] as isize + shift[k]).rem_euclid(set.grid.dims[k] as isize) as usize;
            }
            set.grid.ravel(&cm)
        })
        .collect();
    let mut omega = u_eps.clone();
    omega.axpy(-1.0, u0);
    let diff = omega.clone();
    let scale = eps.powi(m as i32);
    for (g, gamma) in set.indices().iter().enumerate() {
        let du = apply_dalpha(u0, gamma, Variant::Forward);
        let k = k_eps_delta(&du, scfg, dom)?;
        for l in 0..n {
            let chi = set.column(g, l);
            for (node, &cn) in map.iter().enumerate() {
                let kl = k.values[node * n + l];
                if kl == 0.0 {
                    continue;
                }
                for i in 0..n {
                    omega.values[node * n + i] -= scale * chi.values[cn * n + i] * kl;
                }
            }
        }
    }
    let norms = TwoScaleNorms {
        omega_l2: grid_norm(&omega, NormKind::L2)?,
        omega_hm1: grid_norm(&omega, NormKind::Hk(m - 1))?,
        omega_hm: grid_norm(&omega, NormKind::Hk(m))?,
        diff_l2: grid_norm(&diff, NormKind::L2)?,
        diff_hm1: grid_norm(&diff, NormKind::Hk(m - 1))?,
        diff_hm: grid_norm(&diff, NormKind::Hk(m))?,
    };
    Ok(TwoScaleError { omega, norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apfield::{CoeffField, CoeffTensor, FieldShape, FnField};
    use crate::bvp::problem::{solve_eps_problem, solve_homogenized, BvpConfig, DirichletProblem};
    use crate::corrector::{compute_ahat, solve_approx_corrector, CorrectorConfig};
    use std::f64::consts::PI;

    #[test]
    fn grid_mapping_is_exact() {
        let dom = BoxDomain::new(vec![0.25], vec![1.25], vec![256], 1).unwrap();
        let eps = 1.0 / 16.0;
        let g = two_scale_corrector_grid(&dom, eps, 16.0, 8.0).unwrap();
        // 2048 corrector nodes, 257 box nodes, margin 895
        assert!((g.lower[0] - (4.0 - 895.0 / 16.0)).abs() < 1e-12);
        assert!((g.h[0] - 1.0 / 16.0).abs() < 1e-15);
        assert!((g.extent(0) - 128.0).abs() < 1e-9);
        assert_eq!(node_shift(&dom.grid().unwrap(), &g, eps).unwrap(), vec![895]);
        let off = Grid::periodic(vec![0.01], vec![128.0], vec![2048]).unwrap();
        assert!(matches!(node_shift(&dom.grid().unwrap(), &off, eps), Err(Error::GridIncompatible(_))));
        let coarse = Grid::periodic(vec![4.0], vec![128.0], vec![1024]).unwrap();
        assert!(node_shift(&dom.grid().unwrap(), &coarse, eps).is_err());
    }

    #[test]
    fn constant_field_gives_zero_expansion_error() {
        let shape = FieldShape::new(1, 1, 1).unwrap();
        let a = CoeffTensor::scaled_identity(1, 1, 2.0);
        let f = CoeffField::constant("c", shape, 0.5, a).unwrap();
        let src = FnField::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = (PI * x[0]).sin());
        let eps = 1.0 / 8.0;
        let dom = BoxDomain::unit(1, 128, 1).unwrap();
        let cfg = BvpConfig::default();
        let t = 1.0 / eps;
        let cg = two_scale_corrector_grid(&dom, eps, t, 8.0).unwrap();
        let set = solve_approx_corrector(&f, t, &cg, &CorrectorConfig::default()).unwrap();
        let ah = compute_ahat(&set).unwrap();
        let ue = solve_eps_problem(&DirichletProblem { field: &f, eps, source: &src }, &dom, &cfg).unwrap();
        let u0 = solve_homogenized(&ah, &src, &dom, &cfg).unwrap();
        let scfg = SmoothingConfig::for_domain(eps, &dom).unwrap();
        let r = two_scale_error(&ue, &u0, &set, &scfg, &dom).unwrap();
        assert_eq!(r.omega.max_abs(), 0.0);
        assert_eq!(r.norms.diff_hm1, 0.0);
    }

    #[test]
    fn corrector_reduces_energy_error() {
        let f = CoeffField::periodic_1d(1).unwrap();
        let src = FnField::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = (PI * x[0]).sin());
        let cfg = BvpConfig::default();
        for eps in [1.0 / 16.0, 1.0 / 32.0] {
            let dom = BoxDomain::unit_with_spacing(1, eps / 16.0, 1).unwrap();
            let t = 1.0 / eps;
            let cg = two_scale_corrector_grid(&dom, eps, t, 8.0).unwrap();
            let set = solve_approx_corrector(&f, t, &cg, &CorrectorConfig::default()).unwrap();
            let ah = compute_ahat(&set).unwrap();
            let ue = solve_eps_problem(&DirichletProblem { field: &f, eps, source: &src }, &dom, &cfg).unwrap();
            let u0 = solve_homogenized(&ah, &src, &dom, &cfg).unwrap();
            let scfg = SmoothingConfig::for_domain(eps, &dom).unwrap();
            let r = two_scale_error(&ue, &u0, &set, &scfg, &dom).unwrap();
            assert!(r.norms.omega_hm < 0.9 * r.norms.diff_hm, "{:?}", r.norms);
        }
    }
}

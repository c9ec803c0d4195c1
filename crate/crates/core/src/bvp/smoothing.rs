use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::BoxDomain;
use crate::discrete::{Grid, GridField};
use crate::error::{Error, Result};

/// `exp(−1/(1 − r²))` for `r < 1`, zero otherwise (unnormalized).
pub fn mollifier_profile(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Node offsets inside `B(0, ε)` with weights summing to one.
fn kernel(grid: &Grid, eps: f64) -> (Vec<Vec<isize>>, Vec<f64>) {
    let d = grid.d();
    let w: Vec<isize> = grid.h.iter().map(|h| (eps / h).floor() as isize).collect();
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    let mut cur: Vec<isize> = w.iter().map(|x| -x).collect();
    loop {
        let r = cur
            .iter()
            .zip(&grid.h)
            .map(|(o, h)| (*o as f64 * h).powi(2))
            .sum::<f64>()
            .sqrt()
            / eps;
        let z = mollifier_profile(r);
        if z > 0.0 {
            offsets.push(cur.clone());
            weights.push(z);
        }
        let mut k = 0;
        while k < d {
            if cur[k] < w[k] {
                cur[k] += 1;
                break;
            }
            cur[k] = -w[k];
            k += 1;
        }
        if k == d {
            break;
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= total);
    (offsets, weights)
}

/// `S_ε f = ζ_ε * f` with the discrete kernel renormalized to unit mass.
///
/// Periodic grids wrap; on boxes `f` is extended by zero.
pub fn mollify_s(f: &GridField, eps: f64) -> Result<GridField> {
    let grid = &f.grid;
    let h = grid.h_max();
    if !(eps >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::KernelUnderresolved { eps, h });
    }
    let (offsets, weights) = kernel(grid, eps);
    let nc = f.ncomp;
    let d = grid.d();
    let periodic = grid.is_periodic();
    let mut out = vec![0.0; f.values.len()];
    out.par_chunks_mut(nc).enumerate().for_each(|(node, o)| {
        let mut multi = vec![0; d];
        let mut nb = vec![0; d];
        grid.unravel(node, &mut multi);
        'offsets: for (off, w) in offsets.iter().zip(&weights) {
            for k in 0..d {
                let n = grid.dims[k] as isize;
                let j = multi[k] as isize + off[k];
                if periodic {
                    nb[k] = j.rem_euclid(n) as usize;
                } else if j < 0 || j >= n {
                    continue 'offsets;
                } else {
                    nb[k] = j as usize;
                }
            }
            let src = grid.ravel(&nb);
            for (c, v) in o.iter_mut().enumerate() {
                *v += w * f.values[src * nc + c];
            }
        }
    });
    GridField::from_values(grid, nc, out)
}

/// `S_N(t)`, the degree `2N + 1` smoothstep with `N` vanishing derivatives at both ends.
fn smoothstep(order: usize, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let n = order as u64;
    let binom = |a: u64, b: u64| -> f64 { (0..b).fold(1.0, |acc, i| acc * (a - i) as f64 / (i + 1) as f64) };
    let mut s = 0.0;
    for k in 0..=n {
        s += binom(n + k, k) * binom(2 * n + 1, n - k) * (-t).powi(k as i32);
    }
    s * t.powi(order as i32 + 1)
}

/// `η_δ = Π_k S_m((dist_k − δ)/δ)`: zero within `δ` of the boundary, one beyond `2δ`.
pub fn cutoff_eta(dom: &BoxDomain, delta: f64) -> Result<GridField> {
    let grid = dom.grid()?;
    if !(delta >= 4.0 * grid.h_max() * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "cutoff width {delta} must be at least 4h = {}",
            4.0 * grid.h_max()
        )));
    }
    let order = dom.boundary_width.max(1);
    Ok(GridField::from_fn(&grid, 1, |x, o| {
        o[0] = (0..x.len())
            .map(|k| {
                let dist = (x[k] - dom.lower[k]).min(dom.upper[k] - x[k]);
                smoothstep(order, (dist - delta) / delta)
            })
            .product();
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub eps: f64,
    pub delta: f64,
}

impl SmoothingConfig {
    /// Requires `0 < ε < 1` and `2ε ≤ δ ≤ 2`.
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!("ε must lie in (0, 1), got {eps}")));
        }
        if !(delta >= 2.0 * eps * (1.0 - 1e-12) && delta <= 2.0) {
            return Err(Error::InvalidArgument(format!("δ must lie in [2ε, 2], got δ = {delta}, ε = {eps}")));
        }
        Ok(SmoothingConfig { eps, delta })
    }

    /// `δ = max(2ε, diam Ω / 16)`.
    pub fn for_domain(eps: f64, dom: &BoxDomain) -> Result<Self> {
        SmoothingConfig::new(eps, (2.0 * eps).max(dom.diameter() / 16.0).min(2.0))
    }

    /// Any positive pair; [`k_eps_delta`] reports the resulting support leaks.
    pub fn unchecked(eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && delta > 0.0) {
            return Err(Error::InvalidArgument(format!("ε and δ must be positive, got {eps}, {delta}")));
        }
        Ok(SmoothingConfig { eps, delta })
    }
}

/// `K_{ε,δ} f = S_ε(η_δ f)`, erroring if any value lands within `ε` of the boundary.
pub fn k_eps_delta(f: &GridField, scfg: &SmoothingConfig, dom: &BoxDomain) -> Result<GridField> {
    let eta = cutoff_eta(dom, scfg.delta)?;
    if !f.grid.same_shape(&eta.grid) {
        return Err(Error::ShapeMismatch("field is not on the domain grid".into()));
    }
    let nc = f.ncomp;
    let mut g = f.clone();
    for (chunk, e) in g.values.chunks_mut(nc).zip(&eta.values) {
        chunk.iter_mut().for_each(|v| *v *= e);
    }
    let out = mollify_s(&g, scfg.eps)?;
    let dist = out.grid.boundary_distance();
    let count = out
        .values
        .chunks(nc)
        .zip(&dist)
        .filter(|(c, d)| **d < scfg.eps && c.iter().any(|v| *v != 0.0))
        .count();
    if count > 0 {
        return Err(Error::SupportViolation { count });
    }
    Ok(out)
}

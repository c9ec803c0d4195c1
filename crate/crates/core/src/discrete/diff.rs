use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridField, Topology};
use crate::apfield::MultiIndex;

/// One-sided divided difference direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `(u(x + h e_k) − u(x)) / h`
    Forward,
    /// `(u(x) − u(x − h e_k)) / h`
    Backward,
}

/// `out = D_k u` along `axis` for a node-major array with `ncomp` components.
pub fn diff_axis(grid: &Grid, ncomp: usize, axis: usize, variant: Variant, u: &[f64], out: &mut [f64]) {
    let n = grid.dims[axis];
    let inner: usize = grid.dims[axis + 1..].iter().product::<usize>() * ncomp;
    let outer: usize = grid.dims[..axis].iter().product();
    let inv_h = 1.0 / grid.h[axis];
    let periodic = grid.topology == Topology::Periodic;
    let block = n * inner;
    for o in 0..outer {
        let ub = &u[o * block..(o + 1) * block];
        let ob = &mut out[o * block..(o + 1) * block];
        match variant {
            Variant::Forward => {
                for i in 0..n - 1 {
                    let (a, b) = (i * inner, (i + 1) * inner);
                    for r in 0..inner {
                        ob[a + r] = (ub[b + r] - ub[a + r]) * inv_h;
                    }
                }
                let a = (n - 1) * inner;
                for r in 0..inner {
                    let next = if periodic { ub[r] } else { 0.0 };
                    ob[a + r] = (next - ub[a + r]) * inv_h;
                }
            }
            Variant::Backward => {
                for i in (1..n).rev() {
                    let (a, b) = (i * inner, (i - 1) * inner);
                    for r in 0..inner {
                        ob[a + r] = (ub[a + r] - ub[b + r]) * inv_h;
                    }
                }
                let last = (n - 1) * inner;
                for r in 0..inner {
                    let prev = if periodic { ub[last + r] } else { 0.0 };
                    ob[r] = (ub[r] - prev) * inv_h;
                }
            }
        }
    }
}

/// `D^α u` as a composition of one-dimensional differences, written into `out`.
/// `scratch` must have the length of `u`.
pub fn dalpha_into(
    grid: &Grid,
    ncomp: usize,
    alpha: &MultiIndex,
    variant: Variant,
    u: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) {
    out.copy_from_slice(u);
    for (axis, &power) in alpha.entries().iter().enumerate() {
        for _ in 0..power {
            diff_axis(grid, ncomp, axis, variant, out, scratch);
            out.copy_from_slice(scratch);
        }
    }
}

/// `D^α u` with forward or backward differences; `|α| = 0` returns a copy.
pub fn apply_dalpha(u: &GridField, alpha: &MultiIndex, variant: Variant) -> GridField {
    let mut out = vec![0.0; u.values.len()];
    let mut scratch = vec![0.0; u.values.len()];
    dalpha_into(&u.grid, u.ncomp, alpha, variant, &u.values, &mut out, &mut scratch);
    GridField {
        grid: u.grid.clone(),
        ncomp: u.ncomp,
        values: out,
    }
}

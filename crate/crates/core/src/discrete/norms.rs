use serde::{Deserialize, Serialize};

use super::diff::{dalpha_into, Variant};
use super::grid::{Grid, GridField};
use crate::apfield::multi_indices;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "param")]
pub enum NormKind {
    /// `(h^d Σ |u|²)^{1/2}`
    L2,
    /// Largest root-mean-square of `|u|` over node windows `B(x, R)`.
    SR2(f64),
    /// `(Σ_{l ≤ k} Σ_{|α| = l} ‖F^α u‖²_{L²})^{1/2}` with forward differences.
    Hk(usize),
}

/// Axis-aligned box of admissible window centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn grid_norm(u: &GridField, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::L2 => Ok(l2(u)),
        NormKind::SR2(r) => windowed_lp(u, 2.0, r, None),
        NormKind::Hk(k) => {
            let mut s = 0.0;
            for l in 0..=k {
                s += derivative_sq_sum(u, l);
            }
            Ok(s.sqrt())
        }
    }
}

fn l2(u: &GridField) -> f64 {
    (u.grid.cell_volume() * u.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `Σ_{|α| = l} ‖F^α u‖²_{L²}`
fn derivative_sq_sum(u: &GridField, l: usize) -> f64 {
    let per_node = gradient_sq(u, l);
    u.grid.cell_volume() * per_node.iter().sum::<f64>()
}

/// Per-node `Σ_{|α| = l} |F^α u|²` summed over components.
pub fn gradient_sq(u: &GridField, l: usize) -> Vec<f64> {
    let nc = u.ncomp;
    let mut acc = vec![0.0; u.grid.len()];
    let mut out = vec![0.0; u.values.len()];
    let mut scratch = vec![0.0; u.values.len()];
    for a in multi_indices(u.grid.d(), l) {
        dalpha_into(&u.grid, nc, &a, Variant::Forward, &u.values, &mut out, &mut scratch);
        for (node, chunk) in out.chunks(nc).enumerate() {
            acc[node] += chunk.iter().map(|v| v * v).sum::<f64>();
        }
    }
    acc
}

/// `sup_x (mean over the node window B(x, R) of |u|^p)^{1/p}`.
pub fn windowed_lp(u: &GridField, p: f64, r: f64, region: Option<&CenterRegion>) -> Result<f64> {
    let dens: Vec<f64> = u
        .values
        .chunks(u.ncomp)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
        .collect();
    let best = windowed_mean_max(&u.grid, &dens, r, region)?;
    Ok(best.max(0.0).powf(1.0 / p))
}

/// `sup_x` of the window average of a per-node density.
pub fn windowed_mean_max(grid: &Grid, dens: &[f64], r: f64, region: Option<&CenterRegion>) -> Result<f64> {
    if !(r >= grid.h_max() * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!("window radius {r} below grid spacing {}", grid.h_max())));
    }
    if dens.len() != grid.len() {
        return Err(Error::ShapeMismatch("density length differs from grid".into()));
    }
    let in_region = |idx: usize| -> bool {
        region.is_none_or(|reg| {
            let x = grid.coord(idx);
            x.iter()
                .zip(reg.lower.iter().zip(&reg.upper))
                .all(|(v, (lo, hi))| *v >= lo - 1e-12 && *v <= hi + 1e-12)
        })
    };
    match grid.d() {
        1 => Ok(window_1d(grid, dens, r, &in_region)),
        2 => Ok(window_2d(grid, dens, r, &in_region)),
        d => Err(Error::Unsupported(format!("windowed norms in dimension {d}"))),
    }
}

/// Average of a per-node density over nodes in `B(center, r)` (wrapped distance on periodic grids).
pub fn ball_mean(grid: &Grid, dens: &[f64], center: &[f64], r: f64) -> Result<f64> {
    if dens.len() != grid.len() || center.len() != grid.d() {
        return Err(Error::ShapeMismatch("density or centre does not match grid".into()));
    }
    if !(r >= grid.h_max() * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!("ball radius {r} below grid spacing {}", grid.h_max())));
    }
    let mut x = vec![0.0; grid.d()];
    let (mut sum, mut count) = (0.0, 0usize);
    for (idx, v) in dens.iter().enumerate() {
        grid.coord_into(idx, &mut x);
        let mut d2 = 0.0;
        for k in 0..grid.d() {
            let mut dx = (x[k] - center[k]).abs();
            if grid.is_periodic() {
                let e = grid.extent(k);
                dx = dx.rem_euclid(e);
                dx = dx.min(e - dx);
            }
            d2 += dx * dx;
        }
        if d2 <= r * r * (1.0 + 1e-12) {
            sum += v;
            count += 1;
        }
    }
    Ok(sum / count.max(1) as f64)
}

/// Sum and count of `dens[lo..=hi]` along a line, wrapping or clipping.
struct Line {
    prefix: Vec<f64>,
    n: usize,
    periodic: bool,
}

impl Line {
    fn new(vals: impl Iterator<Item = f64>, periodic: bool) -> Self {
        let mut prefix = vec![0.0];
        for v in vals {
            let last = *prefix.last().expect("nonempty");
            prefix.push(last + v);
        }
        let n = prefix.len() - 1;
        Line { prefix, n, periodic }
    }

    fn range(&self, c: isize, w: isize) -> (f64, usize) {
        let n = self.n as isize;
        if self.periodic {
            let w = w.min((n - 1) / 2);
            let (lo, hi) = (c - w, c + w);
            let total = self.prefix[self.n];
            let at = |k: isize| -> f64 {
                let q = k.div_euclid(n);
                q as f64 * total + self.prefix[k.rem_euclid(n) as usize]
            };
            (at(hi + 1) - at(lo), (hi - lo + 1) as usize)
        } else {
            let lo = (c - w).max(0);
            let hi = (c + w).min(n - 1);
            (self.prefix[(hi + 1) as usize] - self.prefix[lo as usize], (hi - lo + 1) as usize)
        }
    }
}

fn window_1d(grid: &Grid, dens: &[f64], r: f64, in_region: &dyn Fn(usize) -> bool) -> f64 {
    let line = Line::new(dens.iter().copied(), grid.is_periodic());
    let w = (r / grid.h[0] + 1e-9).floor() as isize;
    (0..grid.len())
        .filter(|&i| in_region(i))
        .map(|i| {
            let (s, c) = line.range(i as isize, w);
            s / c as f64
        })
        .fold(0.0, f64::max)
}

fn window_2d(grid: &Grid, dens: &[f64], r: f64, in_region: &dyn Fn(usize) -> bool) -> f64 {
    let (n0, n1) = (grid.dims[0], grid.dims[1]);
    let periodic = grid.is_periodic();
    let rows: Vec<Line> = (0..n0)
        .map(|i| Line::new(dens[i * n1..(i + 1) * n1].iter().copied(), periodic))
        .collect();
    let w0 = (r / grid.h[0] + 1e-9).floor() as isize;
    let w0 = if periodic { w0.min((n0 as isize - 1) / 2) } else { w0 };
    let half: Vec<isize> = (-w0..=w0)
        .map(|di| {
            let dy = di as f64 * grid.h[0];
            ((r * r - dy * dy).max(0.0).sqrt() / grid.h[1] + 1e-9).floor() as isize
        })
        .collect();
    let mut best: f64 = 0.0;
    for i in 0..n0 {
        for j in 0..n1 {
            let idx = i * n1 + j;
            if !in_region(idx) {
                continue;
            }
            let mut s = 0.0;
            let mut c = 0usize;
            for (k, di) in (-w0..=w0).enumerate() {
                let row = i as isize + di;
                let row = if periodic {
                    row.rem_euclid(n0 as isize)
                } else if row < 0 || row >= n0 as isize {
                    continue;
                } else {
                    row
                };
                let (rs, rc) = rows[row as usize].range(j as isize, half[k]);
                s += rs;
                c += rc;
            }
            best = best.max(s / c as f64);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn constant_field_norms() {
        let g = Grid::torus(2, 3.0, 12).unwrap();
        let u = GridField::from_fn(&g, 1, |_, o| o[0] = -2.0);
        assert!((grid_norm(&u, NormKind::L2).unwrap() - 2.0 * 3.0).abs() < 1e-12);
        assert!((grid_norm(&u, NormKind::SR2(0.5)).unwrap() - 2.0).abs() < 1e-12);
        assert!((grid_norm(&u, NormKind::Hk(2)).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_norms() {
        let g = Grid::pinned_box(vec![0.0], vec![1.0], vec![10], 1).unwrap();
        let u = GridField::zeros(&g, 2);
        for k in [NormKind::L2, NormKind::SR2(0.3), NormKind::Hk(1)] {
            assert_eq!(grid_norm(&u, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn sine_l2_against_exact_integral() {
        let ext = 2.5;
        let g = Grid::torus(1, ext, 200).unwrap();
        let u = GridField::from_fn(&g, 1, |x, o| o[0] = (TAU * x[0] / ext).sin());
        let exact = (ext / 2.0).sqrt();
        assert!((grid_norm(&u, NormKind::L2).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn window_matches_brute_force() {
        let g = Grid::periodic(vec![0.0, 0.0], vec![2.0, 2.0], vec![16, 20]).unwrap();
        let u = GridField::from_fn(&g, 1, |x, o| o[0] = (3.0 * x[0]).sin() + x[1] * x[1]);
        let r = 0.45;
        let fast = windowed_lp(&u, 2.0, r, None).unwrap();
        let mut best: f64 = 0.0;
        for i in 0..16isize {
            for j in 0..20isize {
                let (mut s, mut c) = (0.0, 0);
                for di in -8isize..=8 {
                    for dj in -10isize..=10 {
                        let (dy, dx) = (di as f64 * g.h[0], dj as f64 * g.h[1]);
                        if dy * dy + dx * dx <= r * r + 1e-12 {
                            let ii = (i + di).rem_euclid(16) as usize;
                            let jj = (j + dj).rem_euclid(20) as usize;
                            s += u.values[ii * 20 + jj].powi(2);
                            c += 1;
                        }
                    }
                }
                best = best.max(s / c as f64);
            }
        }
        assert!((fast - best.sqrt()).abs() < 1e-12, "{fast} vs {}", best.sqrt());
        assert!(windowed_lp(&u, 2.0, 0.01, None).is_err());
    }

    #[test]
    fn clipped_windows_on_box_and_regions() {
        let g = Grid::pinned_box(vec![0.0], vec![1.0], vec![10], 1).unwrap();
        let u = GridField::from_fn(&g, 1, |x, o| o[0] = x[0]);
        // window at the right end averages nodes 0.8, 0.9, 1.0
        let v = windowed_lp(&u, 1.0, 0.2, None).unwrap();
        assert!((v - 0.9).abs() < 1e-12);
        let reg = CenterRegion {
            lower: vec![0.0],
            upper: vec![0.5],
        };
        let v = windowed_lp(&u, 1.0, 0.2, Some(&reg)).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn windows_shrink_to_covering_bound() {
        let g = Grid::torus(1, 8.0, 256).unwrap();
        let u = GridField::from_fn(&g, 1, |x, o| o[0] = (x[0] * 0.7).sin() * (1.0 + x[0]));
        let big = windowed_lp(&u, 2.0, 2.0, None).unwrap();
        let small = windowed_lp(&u, 2.0, 1.0, None).unwrap();
        assert!(big <= 2.0 * small);
    }

    #[test]
    fn ball_mean_wraps_and_matches_window() {
        let g = Grid::torus(1, 8.0, 64).unwrap();
        let dens: Vec<f64> = (0..64).map(|i| i as f64).collect();
        // centre at the origin: nodes 62, 63, 0, 1, 2 within 0.25
        let m = ball_mean(&g, &dens, &[0.0], 0.25).unwrap();
        assert!((m - (62.0 + 63.0 + 0.0 + 1.0 + 2.0) / 5.0).abs() < 1e-12);
        let c = ball_mean(&g, &dens, &[4.0], 1.0).unwrap();
        assert!((c - 32.0).abs() < 1e-12);
        assert!(ball_mean(&g, &dens, &[0.0], 0.01).is_err());
    }
}

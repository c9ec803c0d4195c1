use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::operator::LinearOperator;
use crate::error::{Error, Result};

/// Band storage limit for the banded mean-coefficient factorization.
pub const MAX_BAND_ENTRIES: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    None,
    Diagonal,
    /// Exact inverse of the operator with coefficients replaced by their grid mean.
    #[default]
    MeanCoefficient,
}

pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct DiagonalPreconditioner {
    inv: Vec<f64>,
}

impl DiagonalPreconditioner {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::IndefiniteDetected {
                iteration: 0,
                curvature: diag.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
        Ok(DiagonalPreconditioner {
            inv: diag.iter().map(|v| 1.0 / v).collect(),
        })
    }
}

impl Preconditioner for DiagonalPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((o, a), b) in z.iter_mut().zip(r).zip(&self.inv) {
            *o = a * b;
        }
    }
}

/// Probe vectors: nodes congruent modulo `2m + 1` on every axis, one component at a time.
fn colors(grid: &Grid, ncomp: usize, m: usize) -> impl Iterator<Item = (Vec<usize>, usize)> + '_ {
    let w = 2 * m + 1;
    let d = grid.d();
    let total = w.pow(d as u32);
    (0..total).flat_map(move |c| {
        let mut r = c;
        let residues: Vec<usize> = (0..d)
            .map(|_| {
                let v = r % w;
                r /= w;
                v
            })
            .collect();
        (0..ncomp).map(move |comp| (residues.clone(), comp))
    })
}

fn color_members(grid: &Grid, residues: &[usize], w: usize) -> Vec<usize> {
    let mut multi = vec![0; grid.d()];
    (0..grid.len())
        .filter(|&idx| {
            grid.unravel(idx, &mut multi);
            multi.iter().zip(residues).all(|(i, r)| i % w == *r)
        })
        .collect()
}

/// Exact diagonal of an operator whose stencil has half-width `m` on every axis.
pub fn probe_diagonal(op: &dyn LinearOperator, grid: &Grid, ncomp: usize, m: usize) -> Vec<f64> {
    let len = grid.len() * ncomp;
    let mut diag = vec![0.0; len];
    let w = 2 * m + 1;
    let mut e = vec![0.0; len];
    let mut y = vec![0.0; len];
    for (res, comp) in colors(grid, ncomp, m) {
        let members = color_members(grid, &res, w);
        e.fill(0.0);
        for &j in &members {
            e[j * ncomp + comp] = 1.0;
        }
        op.apply(&e, &mut y);
        for &j in &members {
            diag[j * ncomp + comp] = y[j * ncomp + comp];
        }
    }
    diag
}

/// Symmetric band matrix in lower storage: `data[i * (bw + 1) + (i − j)] = M[i][j]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub size: usize,
    pub bw: usize,
    pub data: Vec<f64>,
}

/// Assembles an operator with stencil half-width `m` (non-periodic grids) by colored probing.
pub fn probe_band(op: &dyn LinearOperator, grid: &Grid, ncomp: usize, m: usize) -> BandMatrix {
    let len = grid.len() * ncomp;
    let bw = BandCholesky::half_bandwidth(grid, ncomp, m);
    let mut data = vec![0.0; len * (bw + 1)];
    let w = 2 * m + 1;
    let d = grid.d();
    let mut e = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut jm = vec![0; d];
    for (res, comp) in colors(grid, ncomp, m) {
        let members = color_members(grid, &res, w);
        e.fill(0.0);
        for &j in &members {
            e[j * ncomp + comp] = 1.0;
        }
        op.apply(&e, &mut y);
        for &j in &members {
            grid.unravel(j, &mut jm);
            let col = j * ncomp + comp;
            let offsets = w.pow(d as u32);
            for o in 0..offsets {
                let mut r = o;
                let mut im = Vec::with_capacity(d);
                let mut inside = true;
                for k in 0..d {
                    let s = (r % w) as isize - m as isize;
                    r /= w;
                    let v = jm[k] as isize + s;
                    if v < 0 || v >= grid.dims[k] as isize {
                        inside = false;
                        break;
                    }
                    im.push(v as usize);
                }
                if !inside {
                    continue;
                }
                let i = grid.ravel(&im);
                for c2 in 0..ncomp {
                    let row = i * ncomp + c2;
                    if row >= col {
                        data[row * (bw + 1) + (row - col)] = y[row];
                    }
                }
            }
        }
    }
    BandMatrix { size: len, bw, data }
}

/// Banded Cholesky factor `M = L Lᵀ`.
pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn half_bandwidth(grid: &Grid, ncomp: usize, m: usize) -> usize {
        let d = grid.d();
        let mut stride = ncomp;
        let mut bw = ncomp - 1;
        for k in (0..d).rev() {
            bw += m * stride;
            stride *= grid.dims[k];
        }
        bw
    }

    pub fn band_entries(grid: &Grid, ncomp: usize, m: usize) -> usize {
        grid.len() * ncomp * (Self::half_bandwidth(grid, ncomp, m) + 1)
    }

    pub fn factor(mut a: BandMatrix) -> Result<Self> {
        let (n, bw) = (a.size, a.bw);
        let s = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut acc = a.data[i * s + (i - j)];
                for k in k0..j {
                    acc -= a.data[i * s + (i - k)] * a.data[j * s + (j - k)];
                }
                if i == j {
                    if !(acc > 0.0) {
                        return Err(Error::IndefiniteDetected {
                            iteration: 0,
                            curvature: acc,
                        });
                    }
                    a.data[i * s] = acc.sqrt();
                } else {
                    a.data[i * s + (i - j)] = acc / a.data[j * s];
                }
            }
        }
        Ok(BandCholesky { l: a })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.l.size, self.l.bw);
        let s = bw + 1;
        let l = &self.l.data;
        for i in 0..n {
            let mut acc = x[i];
            for k in i.saturating_sub(bw)..i {
                acc -= l[i * s + (i - k)] * x[k];
            }
            x[i] = acc / l[i * s];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..(i + bw + 1).min(n) {
                acc -= l[k * s + (k - i)] * x[k];
            }
            x[i] = acc / l[i * s];
        }
    }
}

impl Preconditioner for BandCholesky {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve_in_place(z);
    }
}

/// Inverse of a translation-invariant operator on a periodic grid, given its
/// `ncomp × ncomp` Fourier symbol at angles `θ_k = 2π j_k / N_k`.
pub struct FftPreconditioner {
    dims: Vec<usize>,
    ncomp: usize,
    /// Row-major inverse symbol per frequency; zero where the symbol is singular.
    inv: Vec<Complex<f64>>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftPreconditioner {
    pub fn new(grid: &Grid, ncomp: usize, symbol: impl Fn(&[f64]) -> Vec<Complex<f64>>) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(Error::Unsupported("FFT preconditioner needs a periodic grid".into()));
        }
        let d = grid.d();
        let nn = ncomp * ncomp;
        let mut inv = vec![Complex::new(0.0, 0.0); grid.len() * nn];
        let mut multi = vec![0; d];
        let mut theta = vec![0.0; d];
        for idx in 0..grid.len() {
            grid.unravel(idx, &mut multi);
            for k in 0..d {
                theta[k] = std::f64::consts::TAU * multi[k] as f64 / grid.dims[k] as f64;
            }
            let s = symbol(&theta);
            let scale = s.iter().fold(0.0, |m: f64, v| m.max(v.norm()));
            if scale == 0.0 {
                continue;
            }
            let mat = DMatrix::from_row_slice(ncomp, ncomp, &s);
            if let Some(mi) = mat.try_inverse() {
                for i in 0..ncomp {
                    for j in 0..ncomp {
                        inv[idx * nn + i * ncomp + j] = mi[(i, j)];
                    }
                }
            }
        }
        let mut planner = FftPlanner::new();
        let forward = grid.dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Ok(FftPreconditioner {
            dims: grid.dims.clone(),
            ncomp,
            inv,
            forward,
            inverse,
        })
    }

    fn transform(&self, buf: &mut [Complex<f64>], plans: &[Arc<dyn Fft<f64>>]) {
        let d = self.dims.len();
        for axis in 0..d {
            let n = self.dims[axis];
            let inner: usize = self.dims[axis + 1..].iter().product();
            let outer: usize = self.dims[..axis].iter().product();
            let mut line = vec![Complex::new(0.0, 0.0); n];
            for o in 0..outer {
                for r in 0..inner {
                    for i in 0..n {
                        line[i] = buf[(o * n + i) * inner + r];
                    }
                    plans[axis].process(&mut line);
                    for i in 0..n {
                        buf[(o * n + i) * inner + r] = line[i];
                    }
                }
            }
        }
    }
}

impl Preconditioner for FftPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let nc = self.ncomp;
        let nodes: usize = self.dims.iter().product();
        let mut bufs: Vec<Vec<Complex<f64>>> = (0..nc)
            .map(|c| (0..nodes).map(|i| Complex::new(r[i * nc + c], 0.0)).collect())
            .collect();
        for b in bufs.iter_mut() {
            self.transform(b, &self.forward);
        }
        let nn = nc * nc;
        let mut tmp = vec![Complex::new(0.0, 0.0); nc];
        for idx in 0..nodes {
            for (i, t) in tmp.iter_mut().enumerate() {
                *t = (0..nc).map(|j| self.inv[idx * nn + i * nc + j] * bufs[j][idx]).sum();
            }
            for (c, t) in tmp.iter().enumerate() {
                bufs[c][idx] = *t;
            }
        }
        let scale = 1.0 / nodes as f64;
        for (c, b) in bufs.iter_mut().enumerate() {
            self.transform(b, &self.inverse);
            for i in 0..nodes {
                z[i * nc + c] = b[i].re * scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apfield::{CoeffField, CoeffTensor, FieldShape};
    use crate::discrete::coeff::{sample_on_grid, SampledCoeff};
    use crate::discrete::operator::{EllipticOperator, PolyharmonicOperator};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn fft_inverse_of_constant_coefficient_operator_is_exact() {
        let g = Grid::periodic(vec![0.0, 0.0], vec![1.0, 1.0], vec![12, 10]).unwrap();
        let shape = FieldShape::new(2, 2, 2).unwrap();
        let mut a = CoeffTensor::identity(3, 2);
        a.set(0, 1, 0, 1, 0.2);
        a.set(1, 0, 1, 0, 0.2);
        let c = SampledCoeff::uniform(&g, shape, 0.5, &a).unwrap();
        let op = EllipticOperator::new(&g, &c, 0.3).unwrap();
        let pc = op.preconditioner(PreconditionerKind::MeanCoefficient).unwrap();
        let x = random(op.len(), 1);
        let mut y = vec![0.0; x.len()];
        op.apply(&x, &mut y);
        let mut back = vec![0.0; x.len()];
        pc.apply(&y, &mut back);
        assert!(max_diff(&back, &x) < 1e-9);
    }

    #[test]
    fn polyharmonic_fft_inverse_is_exact() {
        let g = Grid::torus(1, 3.0, 30).unwrap();
        let op = PolyharmonicOperator::new(&g, 2, 0.01, 1).unwrap();
        let pc = op.preconditioner(PreconditionerKind::MeanCoefficient).unwrap();
        let x = random(op.len(), 2);
        let mut y = vec![0.0; x.len()];
        op.apply(&x, &mut y);
        let mut back = vec![0.0; x.len()];
        pc.apply(&y, &mut back);
        assert!(max_diff(&back, &x) < 1e-8);
    }

    #[test]
    fn band_cholesky_inverts_box_operator() {
        for (d, m) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let g = Grid::pinned_box(vec![0.0; d], vec![1.0; d], vec![11; d], m).unwrap();
            let f = CoeffField::isotropic_scalar("t", d, m, 0.2, 3.0, &[(vec![2.0; d], 0.3, 1.0)]).unwrap();
            let c = sample_on_grid(&f, &g, 0.2, &vec![0.0; d]).unwrap();
            let op = EllipticOperator::new(&g, &c, 0.0).unwrap();
            let band = probe_band(&op, &g, 1, m);
            let chol = BandCholesky::factor(band).unwrap();
            let x = random(op.len(), 3);
            let mut y = vec![0.0; x.len()];
            op.apply(&x, &mut y);
            let mut back = vec![0.0; x.len()];
            chol.apply(&y, &mut back);
            assert!(max_diff(&back, &x) < 1e-8, "d={d} m={m}");
        }
    }

    #[test]
    fn probed_diagonal_matches_unit_vectors() {
        let g = Grid::pinned_box(vec![0.0], vec![1.0], vec![12], 1).unwrap();
        let f = CoeffField::quasi_periodic_1d(1).unwrap();
        let c = sample_on_grid(&f, &g, 0.1, &[0.0]).unwrap();
        let op = EllipticOperator::new(&g, &c, 0.5).unwrap();
        let diag = probe_diagonal(&op, &g, 1, 1);
        for j in 0..op.len() {
            let mut e = vec![0.0; op.len()];
            e[j] = 1.0;
            let mut y = vec![0.0; op.len()];
            op.apply(&e, &mut y);
            assert_eq!(diag[j], y[j]);
        }
    }

    #[test]
    fn indefinite_band_is_rejected() {
        let band = BandMatrix {
            size: 2,
            bw: 1,
            data: vec![1.0, 0.0, 1.0, 2.0],
        };
        assert!(matches!(BandCholesky::factor(band), Err(Error::IndefiniteDetected { .. })));
    }
}

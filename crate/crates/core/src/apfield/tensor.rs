use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::multi_index::{multi_indices, MultiIndex};
use crate::error::{Error, Result};

/// Dimension `d`, half-order `m` and system size `n` of a coefficient field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldShape {
    pub d: usize,
    pub m: usize,
    pub n: usize,
}

impl FieldShape {
    pub fn new(d: usize, m: usize, n: usize) -> Result<Self> {
        if d == 0 || m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "d, m, n must be positive (got d={d}, m={m}, n={n})"
            )));
        }
        Ok(FieldShape { d, m, n })
    }

    /// Multi-indices of order `m` in tensor slot order.
    pub fn indices(&self) -> Vec<MultiIndex> {
        multi_indices(self.d, self.m)
    }

    /// Number of multi-indices with `|α| = m`.
    pub fn na(&self) -> usize {
        self.indices().len()
    }

    /// Entries of one `(α, β, i, j)` tensor.
    pub fn tensor_len(&self) -> usize {
        let na = self.na();
        na * na * self.n * self.n
    }
}

/// Tensor `A^{αβ}_{ij}` stored row-major in `(α, β, i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffTensor {
    na: usize,
    n: usize,
    data: Vec<f64>,
}

impl CoeffTensor {
    pub fn zeros(na: usize, n: usize) -> Self {
        CoeffTensor {
            na,
            n,
            data: vec![0.0; na * na * n * n],
        }
    }

    /// `δ^{αβ} δ_{ij}`
    pub fn identity(na: usize, n: usize) -> Self {
        let mut t = Self::zeros(na, n);
        for a in 0..na {
            for i in 0..n {
                t.set(a, a, i, i, 1.0);
            }
        }
        t
    }

    pub fn scaled_identity(na: usize, n: usize, s: f64) -> Self {
        let mut t = Self::identity(na, n);
        t.scale(s);
        t
    }

    pub fn from_vec(na: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != na * na * n * n {
            return Err(Error::ShapeMismatch(format!(
                "tensor with na={na}, n={n} needs {} entries, got {}",
                na * na * n * n,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite tensor entry".into()));
        }
        Ok(CoeffTensor { na, n, data })
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn offset(&self, a: usize, b: usize, i: usize, j: usize) -> usize {
        ((a * self.na + b) * self.n + i) * self.n + j
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, i: usize, j: usize) -> f64 {
        self.data[self.offset(a, b, i, j)]
    }

    pub fn set(&mut self, a: usize, b: usize, i: usize, j: usize, v: f64) {
        let k = self.offset(a, b, i, j);
        self.data[k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &CoeffTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `(A^{αβ}_{ij} + A^{βα}_{ji}) / 2`
    pub fn symmetrized(&self) -> CoeffTensor {
        symmetrize_slice(self.na, self.n, &self.data)
    }

    /// Whether `A^{αβ}_{ij} = A^{βα}_{ji}` within `tol` relative to `max|A|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.na).all(|a| {
            (0..self.na).all(|b| {
                (0..self.n).all(|i| {
                    (0..self.n).all(|j| {
                        (self.get(a, b, i, j) - self.get(b, a, j, i)).abs() <= tol * scale
                    })
                })
            })
        })
    }

    /// Smallest eigenvalue of the symmetrized form `φ ↦ Σ A^{αβ}_{ij} φ^β_j φ^α_i`
    /// over unit vectors `φ = (φ^α_i)`.
    pub fn min_form_eigenvalue(&self) -> f64 {
        min_form_eigenvalue(self.na, self.n, &self.data)
    }
}

pub(crate) fn symmetrize_slice(na: usize, n: usize, data: &[f64]) -> CoeffTensor {
    let mut out = CoeffTensor::zeros(na, n);
    let at = |a: usize, b: usize, i: usize, j: usize| data[((a * na + b) * n + i) * n + j];
    for a in 0..na {
        for b in 0..na {
            for i in 0..n {
                for j in 0..n {
                    out.set(a, b, i, j, 0.5 * (at(a, b, i, j) + at(b, a, j, i)));
                }
            }
        }
    }
    out
}

pub(crate) fn min_form_eigenvalue(na: usize, n: usize, data: &[f64]) -> f64 {
    let dim = na * n;
    if dim == 1 {
        return data[0];
    }
    let q = DMatrix::from_fn(dim, dim, |r, c| {
        let (a, i) = (r / n, r % n);
        let (b, j) = (c / n, c % n);
        let x = data[((a * na + b) * n + i) * n + j];
        let y = data[((b * na + a) * n + j) * n + i];
        0.5 * (x + y)
    });
    SymmetricEigen::new(q)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}

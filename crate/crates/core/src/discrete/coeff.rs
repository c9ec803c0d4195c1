use rayon::prelude::*;

use super::grid::{Grid, GridField};
use crate::apfield::tensor::min_form_eigenvalue;
use crate::apfield::{CoeffTensor, CoefficientField, Evaluable, FieldShape};
use crate::error::{Error, Result};

/// Coefficient tensor sampled at every node, node-major then `(α, β, i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoeff {
    pub shape: FieldShape,
    pub grid: Grid,
    pub values: Vec<f64>,
    pub mu: f64,
}

/// Pointwise admissibility of sampled coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAdmissibility {
    pub min_eigen: f64,
    pub max_abs: f64,
    pub symmetric: bool,
}

impl SampledCoeff {
    /// The same tensor at every node.
    pub fn uniform(grid: &Grid, shape: FieldShape, mu: f64, a: &CoeffTensor) -> Result<Self> {
        if a.as_slice().len() != shape.tensor_len() {
            return Err(Error::ShapeMismatch("tensor does not match field shape".into()));
        }
        let values = a.as_slice().repeat(grid.len());
        Ok(SampledCoeff {
            shape,
            grid: grid.clone(),
            values,
            mu,
        })
    }

    pub fn tensor_len(&self) -> usize {
        self.shape.tensor_len()
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let t = self.tensor_len();
        &self.values[node * t..(node + 1) * t]
    }

    /// Grid average `(α, β, i, j) ↦ mean_x A(x)`.
    pub fn mean(&self) -> CoeffTensor {
        let t = self.tensor_len();
        let mut m = vec![0.0; t];
        for chunk in self.values.chunks(t) {
            for (a, b) in m.iter_mut().zip(chunk) {
                *a += b;
            }
        }
        let n = self.grid.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        CoeffTensor::from_vec(self.shape.na(), self.shape.n, m).expect("finite mean")
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.at(0);
        self.values.chunks(self.tensor_len()).all(|c| c == first)
    }

    pub fn check(&self) -> SampledAdmissibility {
        let (na, n) = (self.shape.na(), self.shape.n);
        let t = self.tensor_len();
        let (min_eigen, max_abs) = self
            .values
            .par_chunks(t)
            .map(|c| (min_form_eigenvalue(na, n, c), c.iter().fold(0.0, |m: f64, v| m.max(v.abs()))))
            .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        let symmetric = self.values.chunks(t).all(|c| {
            CoeffTensor::from_vec(na, n, c.to_vec())
                .map(|x| x.is_symmetric(1e-12))
                .unwrap_or(false)
        });
        SampledAdmissibility {
            min_eigen,
            max_abs,
            symmetric,
        }
    }

    /// Errors unless the sampled tensor is symmetric, bounded by `1/μ` and coercive with `μ`.
    pub fn require_admissible(&self) -> Result<()> {
        let r = self.check();
        if !r.symmetric {
            return Err(Error::Unsupported(
                "non-symmetric coefficients: the conjugate-gradient solver needs A^{αβ}_{ij} = A^{βα}_{ji}".into(),
            ));
        }
        let slack = 1e-12;
        if r.max_abs > (1.0 + slack) / self.mu || r.min_eigen < self.mu * (1.0 - slack) {
            return Err(Error::NotAdmissible(format!(
                "sampled min eigenvalue {:.6}, max entry {:.6}, mu {}",
                r.min_eigen, r.max_abs, self.mu
            )));
        }
        Ok(())
    }
}

/// `node x ↦ field((x + offset) / scale)`, exact evaluation.
pub fn sample_on_grid(field: &dyn CoefficientField, grid: &Grid, scale: f64, offset: &[f64]) -> Result<SampledCoeff> {
    check_scale(grid, scale, offset)?;
    let shape = field.shape();
    if shape.d != grid.d() {
        return Err(Error::ShapeMismatch(format!("field dimension {} vs grid {}", shape.d, grid.d())));
    }
    let values = sample_values(field, grid, scale, offset);
    Ok(SampledCoeff {
        shape,
        grid: grid.clone(),
        values,
        mu: field.mu(),
    })
}

/// `node x ↦ f((x + offset) / scale)` for any evaluable.
pub fn sample_evaluable(f: &dyn Evaluable, grid: &Grid, scale: f64, offset: &[f64]) -> Result<GridField> {
    check_scale(grid, scale, offset)?;
    let values = sample_values(f, grid, scale, offset);
    GridField::from_values(grid, f.ncomp(), values)
}

fn check_scale(grid: &Grid, scale: f64, offset: &[f64]) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    if offset.len() != grid.d() {
        return Err(Error::ShapeMismatch("offset dimension differs from grid".into()));
    }
    Ok(())
}

fn sample_values(f: &dyn Evaluable, grid: &Grid, scale: f64, offset: &[f64]) -> Vec<f64> {
    let nc = f.ncomp();
    let d = grid.d();
    let mut values = vec![0.0; grid.len() * nc];
    values.par_chunks_mut(nc).enumerate().for_each(|(idx, out)| {
        let mut x = vec![0.0; d];
        grid.coord_into(idx, &mut x);
        for (xk, ok) in x.iter_mut().zip(offset) {
            *xk = (*xk + ok) / scale;
        }
        f.eval_into(&x, out);
    });
    values
}

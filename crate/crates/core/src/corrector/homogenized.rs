use std::path::Path;

use serde::{Deserialize, Serialize};

use super::approx::CorrectorSet;
use crate::apfield::{multi_indices, CoeffTensor, FieldShape};
use crate::discrete::diff::{dalpha_into, Variant};
use crate::discrete::Grid;
use crate::error::{Error, Result};

/// Where a homogenized tensor came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub field: String,
    /// `None` when the tensor was not obtained from a corrector solve.
    pub t: Option<f64>,
    pub extent: Vec<f64>,
    pub h: Vec<f64>,
    pub nodes: usize,
    pub max_residual: f64,
}

/// Constant tensor `Â^{αβ}_{ij}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedTensor {
    pub shape: FieldShape,
    pub ahat: CoeffTensor,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    alpha: String,
    beta: String,
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TensorExport {
    d: usize,
    m: usize,
    n: usize,
    /// Multi-index order used for the `(α, β, i, j)` row-major layout.
    indices: Vec<String>,
    entries: Vec<TensorEntry>,
    provenance: Provenance,
}

impl HomogenizedTensor {
    /// Constant tensor with no corrector solve behind it.
    pub fn from_constant(shape: FieldShape, ahat: CoeffTensor, field: &str) -> Self {
        HomogenizedTensor {
            shape,
            ahat,
            provenance: Provenance {
                field: field.to_string(),
                t: None,
                extent: Vec::new(),
                h: Vec::new(),
                nodes: 0,
                max_residual: 0.0,
            },
        }
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.ahat.is_symmetric(rel_tol)
    }

    pub fn min_eigen(&self) -> f64 {
        self.ahat.min_form_eigenvalue()
    }

    pub fn to_json(&self) -> Result<String> {
        let idx = multi_indices(self.shape.d, self.shape.m);
        let n = self.shape.n;
        let mut entries = Vec::new();
        for (a, al) in idx.iter().enumerate() {
            for (b, be) in idx.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        entries.push(TensorEntry {
                            alpha: al.to_string(),
                            beta: be.to_string(),
                            i,
                            j,
                            value: self.ahat.get(a, b, i, j),
                        });
                    }
                }
            }
        }
        let ex = TensorExport {
            d: self.shape.d,
            m: self.shape.m,
            n,
            indices: idx.iter().map(|a| a.to_string()).collect(),
            entries,
            provenance: self.provenance.clone(),
        };
        serde_json::to_string_pretty(&ex).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ex: TensorExport = serde_json::from_str(s).map_err(|e| Error::Io(e.to_string()))?;
        let shape = FieldShape::new(ex.d, ex.m, ex.n)?;
        let values: Vec<f64> = ex.entries.iter().map(|e| e.value).collect();
        Ok(HomogenizedTensor {
            shape,
            ahat: CoeffTensor::from_vec(shape.na(), shape.n, values)?,
            provenance: ex.provenance,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// `F^γ χ^{β, j}` for every `γ` and column, indexed `[column][γ]`.
pub(crate) fn corrector_gradients(set: &CorrectorSet) -> Vec<Vec<Vec<f64>>> {
    let idx = set.indices();
    let n = set.shape.n;
    set.chi
        .iter()
        .map(|c| {
            let mut scratch = vec![0.0; c.values.len()];
            idx.iter()
                .map(|g| {
                    let mut out = vec![0.0; c.values.len()];
                    dalpha_into(&set.grid, n, g, Variant::Forward, &c.values, &mut out, &mut scratch);
                    out
                })
                .collect()
        })
        .collect()
}

/// Per-node `A^{αβ}_{ij} + Σ_{γ,k} A^{αγ}_{ik} F^γ χ^{β,j}_k`, node-major.
fn corrected_coefficients(set: &CorrectorSet) -> Vec<f64> {
    let shape = set.shape;
    let (na, n) = (shape.na(), shape.n);
    let t = shape.tensor_len();
    let grads = corrector_gradients(set);
    let mut out = set.coeff.values.clone();
    for node in 0..set.grid.len() {
        let a = &set.coeff.values[node * t..(node + 1) * t];
        for al in 0..na {
            for be in 0..na {
                for i in 0..n {
                    for j in 0..n {
                        let col = be * n + j;
                        let mut s = 0.0;
                        for ga in 0..na {
                            for k in 0..n {
                                s += a[((al * na + ga) * n + i) * n + k] * grads[col][ga][node * n + k];
                            }
                        }
                        out[node * t + ((al * na + be) * n + i) * n + j] += s;
                    }
                }
            }
        }
    }
    out
}

fn node_mean(values: &[f64], t: usize, nodes: usize) -> Vec<f64> {
    let mut m = vec![0.0; t];
    for chunk in values.chunks(t) {
        for (a, b) in m.iter_mut().zip(chunk) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|v| *v /= nodes as f64);
    m
}

/// `Â_T = ⟨A + A ∇^m χ_T⟩` with forward differences and the grid average.
pub fn compute_ahat(set: &CorrectorSet) -> Result<HomogenizedTensor> {
    let shape = set.shape;
    let corrected = corrected_coefficients(set);
    let mean = node_mean(&corrected, shape.tensor_len(), set.grid.len());
    Ok(HomogenizedTensor {
        shape,
        ahat: CoeffTensor::from_vec(shape.na(), shape.n, mean)?,
        provenance: Provenance {
            field: set.field_name.clone(),
            t: Some(set.t),
            extent: (0..set.grid.d()).map(|k| set.grid.extent(k)).collect(),
            h: set.grid.h.clone(),
            nodes: set.grid.len(),
            max_residual: set.max_residual(),
        },
    })
}

/// `B_T = A + A ∇^m χ_T − Â` sampled on the corrector grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxTensor {
    pub shape: FieldShape,
    pub grid: Grid,
    /// Node-major, then `(α, β, i, j)`.
    pub values: Vec<f64>,
    pub mean: CoeffTensor,
}

impl FluxTensor {
    /// Entry `(α, β, i, j)` as a scalar node array.
    pub fn entry(&self, a: usize, b: usize, i: usize, j: usize) -> Vec<f64> {
        let t = self.shape.tensor_len();
        let off = self.mean.offset(a, b, i, j);
        (0..self.grid.len()).map(|node| self.values[node * t + off]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn compute_flux(set: &CorrectorSet, ahat: &HomogenizedTensor) -> Result<FluxTensor> {
    let shape = set.shape;
    if ahat.shape != shape {
        return Err(Error::ShapeMismatch("homogenized tensor shape differs from corrector set".into()));
    }
    let t = shape.tensor_len();
    let mut values = corrected_coefficients(set);
    for chunk in values.chunks_mut(t) {
        for (v, a) in chunk.iter_mut().zip(ahat.ahat.as_slice()) {
            *v -= a;
        }
    }
    let mean = node_mean(&values, t, set.grid.len());
    Ok(FluxTensor {
        shape,
        grid: set.grid.clone(),
        values,
        mean: CoeffTensor::from_vec(shape.na(), shape.n, mean)?,
    })
}

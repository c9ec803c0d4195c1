use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment of a [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Topology {
    /// Indices wrap around.
    Periodic,
    /// Nodes `0..=n` per axis; the first and last `layers` nodes are held at zero
    /// and values outside the grid are treated as zero.
    Pinned { layers: usize },
}

/// Uniform tensor grid. Nodes are stored row-major over axes (first axis slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: Vec<usize>,
    pub h: Vec<f64>,
    pub lower: Vec<f64>,
    pub topology: Topology,
}

/// Periodic grid used for corrector solves.
pub type TorusGrid = Grid;

impl Grid {
    /// Periodic box `[0, extent)^d` with `n_per_dim` nodes per axis.
    pub fn torus(d: usize, extent: f64, n_per_dim: usize) -> Result<Grid> {
        Grid::periodic(vec![0.0; d], vec![extent; d], vec![n_per_dim; d])
    }

    pub fn periodic(lower: Vec<f64>, extent: Vec<f64>, n: Vec<usize>) -> Result<Grid> {
        let d = lower.len();
        if d == 0 || extent.len() != d || n.len() != d {
            return Err(Error::ShapeMismatch("grid axes disagree".into()));
        }
        if n.iter().any(|&k| k < 2) || extent.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidArgument("grid needs >= 2 nodes and positive extent".into()));
        }
        let h = extent.iter().zip(&n).map(|(e, &k)| e / k as f64).collect();
        Ok(Grid {
            dims: n,
            h,
            lower,
            topology: Topology::Periodic,
        })
    }

    /// Box `[lower, upper]` split into `intervals` cells per axis, with
    /// `layers` pinned node layers on each side.
    pub fn pinned_box(lower: Vec<f64>, upper: Vec<f64>, intervals: Vec<usize>, layers: usize) -> Result<Grid> {
        let d = lower.len();
        if d == 0 || upper.len() != d || intervals.len() != d {
            return Err(Error::ShapeMismatch("grid axes disagree".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidArgument("box upper corner must exceed lower corner".into()));
        }
        if intervals.iter().any(|&k| k < 2 * layers + 1) {
            return Err(Error::InvalidArgument(format!(
                "box needs more than {} intervals per axis to hold {layers} pinned layers",
                2 * layers
            )));
        }
        let h = lower
            .iter()
            .zip(&upper)
            .zip(&intervals)
            .map(|((a, b), &k)| (b - a) / k as f64)
            .collect();
        Ok(Grid {
            dims: intervals.iter().map(|k| k + 1).collect(),
            h,
            lower,
            topology: Topology::Pinned { layers },
        })
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self) -> bool {
        self.topology == Topology::Periodic
    }

    /// `Π_k h_k`
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Largest spacing.
    pub fn h_max(&self) -> f64 {
        self.h.iter().fold(0.0, |m: f64, v| m.max(*v))
    }

    /// Period (periodic) or box side (pinned) along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        match self.topology {
            Topology::Periodic => self.h[axis] * self.dims[axis] as f64,
            Topology::Pinned { .. } => self.h[axis] * (self.dims[axis] - 1) as f64,
        }
    }

    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for k in (0..self.d()).rev() {
            out[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.dims).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn coord_into(&self, idx: usize, out: &mut [f64]) {
        let mut idx = idx;
        for k in (0..self.d()).rev() {
            let i = idx % self.dims[k];
            idx /= self.dims[k];
            out[k] = self.lower[k] + i as f64 * self.h[k];
        }
    }

    pub fn coord(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d()];
        self.coord_into(idx, &mut x);
        x
    }

    /// `true` for nodes held at zero.
    pub fn pinned_mask(&self) -> Vec<bool> {
        let Topology::Pinned { layers } = self.topology else {
            return vec![false; self.len()];
        };
        let mut multi = vec![0; self.d()];
        (0..self.len())
            .map(|idx| {
                self.unravel(idx, &mut multi);
                multi
                    .iter()
                    .zip(&self.dims)
                    .any(|(&i, &n)| i < layers || i + layers >= n)
            })
            .collect()
    }

    /// Distance from each node to the box boundary (`+∞` on periodic grids).
    pub fn boundary_distance(&self) -> Vec<f64> {
        if self.is_periodic() {
            return vec![f64::INFINITY; self.len()];
        }
        let mut multi = vec![0; self.d()];
        (0..self.len())
            .map(|idx| {
                self.unravel(idx, &mut multi);
                (0..self.d())
                    .map(|k| {
                        let i = multi[k].min(self.dims[k] - 1 - multi[k]);
                        i as f64 * self.h[k]
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dims == other.dims && self.topology == other.topology
    }
}

/// Node values of an `ncomp`-vector field; component index innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: Grid,
    pub ncomp: usize,
    pub values: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"APGF";

impl GridField {
    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        GridField {
            grid: grid.clone(),
            ncomp,
            values: vec![0.0; grid.len() * ncomp],
        }
    }

    pub fn from_values(grid: &Grid, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * ncomp {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} nodes x {ncomp} components",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid field has non-finite entries".into()));
        }
        Ok(GridField {
            grid: grid.clone(),
            ncomp,
            values,
        })
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn(grid: &Grid, ncomp: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut out = GridField::zeros(grid, ncomp);
        let mut x = vec![0.0; grid.d()];
        for (idx, chunk) in out.values.chunks_mut(ncomp).enumerate() {
            grid.coord_into(idx, &mut x);
            f(&x, chunk);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Component `c` as a scalar field.
    pub fn component(&self, c: usize) -> GridField {
        GridField {
            grid: self.grid.clone(),
            ncomp: 1,
            values: self.values.iter().skip(c).step_by(self.ncomp).copied().collect(),
        }
    }

    /// Grid average of every component.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ncomp];
        for chunk in self.values.chunks(self.ncomp) {
            for (a, b) in m.iter_mut().zip(chunk) {
                *a += b;
            }
        }
        let n = self.grid.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&mut self, a: f64, x: &GridField) {
        for (u, v) in self.values.iter_mut().zip(&x.values) {
            *u += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    /// `h^d Σ u·v`
    pub fn inner(&self, other: &GridField) -> f64 {
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    /// CSV dump: one row per node with integer indices, coordinates and components.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = self.grid.d();
        let mut header: Vec<String> = (0..d).map(|k| format!("i{k}")).collect();
        header.extend((0..d).map(|k| format!("x{k}")));
        header.extend((0..self.ncomp).map(|c| format!("u{c}")));
        w.write_record(&header)?;
        let mut multi = vec![0; d];
        let mut x = vec![0.0; d];
        for (idx, chunk) in self.values.chunks(self.ncomp).enumerate() {
            self.grid.unravel(idx, &mut multi);
            self.grid.coord_into(idx, &mut x);
            let mut rec: Vec<String> = multi.iter().map(|v| v.to_string()).collect();
            rec.extend(x.iter().map(|v| format!("{v:e}")));
            rec.extend(chunk.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian binary dump: magic, `d`, dims, `ncomp`, then the values.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&(self.grid.d() as u64).to_le_bytes())?;
        for &n in &self.grid.dims {
            f.write_all(&(n as u64).to_le_bytes())?;
        }
        f.write_all(&(self.ncomp as u64).to_le_bytes())?;
        for v in &self.values {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    /// Reads values written by [`GridField::write_binary`] onto a matching grid.
    pub fn read_binary(grid: &Grid, path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = || Error::Io("malformed grid field dump".into());
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad());
        }
        let mut words = bytes[4..].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")));
        let d = words.next().ok_or_else(bad)? as usize;
        let dims: Vec<usize> = (0..d).map(|_| words.next().map(|v| v as usize)).collect::<Option<_>>().ok_or_else(bad)?;
        let ncomp = words.next().ok_or_else(bad)? as usize;
        if dims != grid.dims {
            return Err(Error::ShapeMismatch("dump dims differ from grid".into()));
        }
        let values: Vec<f64> = words.map(f64::from_bits).collect();
        GridField::from_values(grid, ncomp, values)
    }
}

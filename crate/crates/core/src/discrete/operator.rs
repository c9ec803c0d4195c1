use super::coeff::SampledCoeff;
use super::diff::{dalpha_into, diff_axis, Variant};
use super::grid::{Grid, GridField};
use super::precond::{probe_band, probe_diagonal, BandCholesky, DiagonalPreconditioner, FftPreconditioner,
    IdentityPreconditioner, Preconditioner, PreconditionerKind, MAX_BAND_ENTRIES};
use crate::apfield::{multi_indices, CoeffTensor, MultiIndex};
use crate::error::{Error, Result};

/// Symmetric linear map on node-major arrays.
pub trait LinearOperator: Sync {
    fn len(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `Some((ncomp, λ))` when per-component constants are exact eigenvectors with eigenvalue `λ`.
    fn constant_modes(&self) -> Option<(usize, f64)> {
        None
    }

    fn preconditioner(&self, _kind: PreconditionerKind) -> Result<Box<dyn Preconditioner + '_>> {
        Ok(Box::new(IdentityPreconditioner))
    }

    /// Upper bound on the largest absolute row sum, if known.
    fn abs_row_bound(&self) -> Option<f64> {
        None
    }
}

/// `Π_k (2/h_k)^{α_k}`, the absolute row sum of `F^α` and `B^α`.
fn stencil_weight(grid: &Grid, alpha: &MultiIndex) -> f64 {
    alpha
        .entries()
        .iter()
        .zip(&grid.h)
        .map(|(&p, h)| (2.0 / h).powi(p as i32))
        .product()
}

/// `T^{−2m}`, zero for `T = ∞`.
pub fn mass_term(t: f64, m: usize) -> Result<f64> {
    if t.is_infinite() && t > 0.0 {
        return Ok(0.0);
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be positive, got {t}")));
    }
    Ok(t.powi(-2 * m as i32))
}

/// `(−1)^m Σ_{αβ} B^α(A^{αβ} F^β u) + τ u` with identity rows on pinned nodes.
pub struct EllipticOperator<'a> {
    pub grid: &'a Grid,
    pub coeff: &'a SampledCoeff,
    pub tau: f64,
    indices: Vec<MultiIndex>,
    pinned: Option<Vec<bool>>,
}

impl<'a> EllipticOperator<'a> {
    pub fn new(grid: &'a Grid, coeff: &'a SampledCoeff, tau: f64) -> Result<Self> {
        if !grid.same_shape(&coeff.grid) {
            return Err(Error::ShapeMismatch("coefficients sampled on a different grid".into()));
        }
        if coeff.shape.d != grid.d() {
            return Err(Error::ShapeMismatch("coefficient dimension differs from grid".into()));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("mass term must be finite and >= 0, got {tau}")));
        }
        let m = coeff.shape.m;
        if grid.dims.iter().any(|&n| n < 4 * m) {
            return Err(Error::InvalidArgument(format!("need at least {} nodes per axis for m = {m}", 4 * m)));
        }
        let pinned = (!grid.is_periodic()).then(|| grid.pinned_mask());
        Ok(EllipticOperator {
            grid,
            coeff,
            tau,
            indices: multi_indices(grid.d(), m),
            pinned,
        })
    }

    pub fn ncomp(&self) -> usize {
        self.coeff.shape.n
    }

    pub fn m(&self) -> usize {
        self.coeff.shape.m
    }

    fn masked<'b>(&self, x: &'b [f64], buf: &'b mut Vec<f64>) -> &'b [f64] {
        match &self.pinned {
            None => x,
            Some(mask) => {
                let n = self.ncomp();
                buf.clear();
                buf.extend_from_slice(x);
                for (node, &p) in mask.iter().enumerate() {
                    if p {
                        buf[node * n..(node + 1) * n].fill(0.0);
                    }
                }
                buf
            }
        }
    }

    /// Operator with the grid-mean tensor in place of `A(x)`.
    fn mean_operator_coeff(&self) -> Result<SampledCoeff> {
        let mean = self.coeff.mean().symmetrized();
        SampledCoeff::uniform(self.grid, self.coeff.shape, self.coeff.mu, &mean)
    }
}

/// Fourier symbol of `Σ_{αβ} B^α(Ā^{αβ} F^β ·)(−1)^m + τ` on a periodic grid.
pub(crate) fn mean_symbol<'g>(
    grid: &'g Grid,
    indices: &'g [MultiIndex],
    abar: &CoeffTensor,
    tau: f64,
) -> impl Fn(&[f64]) -> Vec<nalgebra::Complex<f64>> + 'g {
    let n = abar.n();
    let abar = abar.clone();
    move |theta: &[f64]| {
        let sig: Vec<nalgebra::Complex<f64>> = indices
            .iter()
            .map(|a| {
                a.entries()
                    .iter()
                    .enumerate()
                    .fold(nalgebra::Complex::new(1.0, 0.0), |acc, (k, &p)| {
                        let s = (nalgebra::Complex::new(0.0, theta[k]).exp() - 1.0) / grid.h[k];
                        acc * s.powu(p as u32)
                    })
            })
            .collect();
        let mut out = vec![nalgebra::Complex::new(0.0, 0.0); n * n];
        for (a, sa) in sig.iter().enumerate() {
            for (b, sb) in sig.iter().enumerate() {
                let w = sa.conj() * sb;
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] += w * abar.get(a, b, i, j);
                    }
                }
            }
        }
        for i in 0..n {
            out[i * n + i] += tau;
        }
        out
    }
}

impl LinearOperator for EllipticOperator<'_> {
    fn len(&self) -> usize {
        self.grid.len() * self.ncomp()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.ncomp();
        let na = self.indices.len();
        let len = x.len();
        let mut mbuf = Vec::new();
        let xin = self.masked(x, &mut mbuf);
        let mut scratch = vec![0.0; len];
        let fb: Vec<Vec<f64>> = self
            .indices
            .iter()
            .map(|b| {
                let mut out = vec![0.0; len];
                dalpha_into(self.grid, n, b, Variant::Forward, xin, &mut out, &mut scratch);
                out
            })
            .collect();
        let sign = if self.m().is_multiple_of(2) { 1.0 } else { -1.0 };
        let t = self.coeff.tensor_len();
        let mut w = vec![0.0; len];
        let mut bw = vec![0.0; len];
        for (e, v) in y.iter_mut().zip(xin) {
            *e = self.tau * v;
        }
        for (a, alpha) in self.indices.iter().enumerate() {
            for node in 0..self.grid.len() {
                let at = &self.coeff.values[node * t..(node + 1) * t];
                for i in 0..n {
                    let mut s = 0.0;
                    for (b, f) in fb.iter().enumerate() {
                        let base = ((a * na + b) * n + i) * n;
                        for j in 0..n {
                            s += at[base + j] * f[node * n + j];
                        }
                    }
                    w[node * n + i] = s;
                }
            }
            dalpha_into(self.grid, n, alpha, Variant::Backward, &w, &mut bw, &mut scratch);
            for (e, v) in y.iter_mut().zip(&bw) {
                *e += sign * v;
            }
        }
        if let Some(mask) = &self.pinned {
            for (node, &p) in mask.iter().enumerate() {
                if p {
                    y[node * n..(node + 1) * n].copy_from_slice(&x[node * n..(node + 1) * n]);
                }
            }
        }
    }

    fn constant_modes(&self) -> Option<(usize, f64)> {
        self.grid.is_periodic().then_some((self.ncomp(), self.tau))
    }

    fn abs_row_bound(&self) -> Option<f64> {
        let n = self.ncomp();
        let na = self.indices.len();
        let w: Vec<f64> = self.indices.iter().map(|a| stencil_weight(self.grid, a)).collect();
        let t = self.coeff.tensor_len();
        let mut best: f64 = 0.0;
        for at in self.coeff.values.chunks(t) {
            for i in 0..n {
                let mut s = 0.0;
                for a in 0..na {
                    for b in 0..na {
                        let base = ((a * na + b) * n + i) * n;
                        let row: f64 = at[base..base + n].iter().map(|v| v.abs()).sum();
                        s += w[a] * w[b] * row;
                    }
                }
                best = best.max(s);
            }
        }
        Some((best + self.tau).max(1.0))
    }

    fn preconditioner(&self, kind: PreconditionerKind) -> Result<Box<dyn Preconditioner + '_>> {
        let n = self.ncomp();
        let m = self.m();
        match kind {
            PreconditionerKind::None => Ok(Box::new(IdentityPreconditioner)),
            PreconditionerKind::Diagonal => Ok(Box::new(DiagonalPreconditioner::new(probe_diagonal(self, self.grid, n, m))?)),
            PreconditionerKind::MeanCoefficient => {
                if self.grid.is_periodic() {
                    let abar = self.coeff.mean().symmetrized();
                    let sym = mean_symbol(self.grid, &self.indices, &abar, self.tau);
                    return Ok(Box::new(FftPreconditioner::new(self.grid, n, sym)?));
                }
                if BandCholesky::band_entries(self.grid, n, m) > MAX_BAND_ENTRIES {
                    return Ok(Box::new(DiagonalPreconditioner::new(probe_diagonal(self, self.grid, n, m))?));
                }
                let mean = self.mean_operator_coeff()?;
                let mop = EllipticOperator::new(self.grid, &mean, self.tau)?;
                let band = probe_band(&mop, self.grid, n, m);
                Ok(Box::new(BandCholesky::factor(band)?))
            }
        }
    }
}

/// `Op u` for sampled coefficients and `T` (`T = ∞` drops the mass term).
pub fn apply_operator(coeff: &SampledCoeff, t: f64, u: &GridField) -> Result<GridField> {
    if u.ncomp != coeff.shape.n || !u.grid.same_shape(&coeff.grid) {
        return Err(Error::ShapeMismatch("field does not match sampled coefficients".into()));
    }
    let tau = mass_term(t, coeff.shape.m)?;
    let op = EllipticOperator::new(&u.grid, coeff, tau)?;
    let mut y = vec![0.0; u.values.len()];
    op.apply(&u.values, &mut y);
    GridField::from_values(&u.grid, u.ncomp, y)
}

/// `((−Δ_h)^m + τ) u` with `−Δ_h = −Σ_k B_k F_k`, applied componentwise.
pub struct PolyharmonicOperator<'a> {
    pub grid: &'a Grid,
    pub m: usize,
    pub tau: f64,
    pub ncomp: usize,
}

impl<'a> PolyharmonicOperator<'a> {
    pub fn new(grid: &'a Grid, m: usize, tau: f64, ncomp: usize) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(Error::Unsupported("polyharmonic operator is defined on periodic grids".into()));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("mass term must be finite and >= 0, got {tau}")));
        }
        Ok(PolyharmonicOperator { grid, m, tau, ncomp })
    }

    /// `u ↦ −Δ_h u`
    pub fn neg_laplacian(&self, u: &[f64], out: &mut [f64]) {
        let mut f = vec![0.0; u.len()];
        let mut b = vec![0.0; u.len()];
        out.fill(0.0);
        for axis in 0..self.grid.d() {
            diff_axis(self.grid, self.ncomp, axis, Variant::Forward, u, &mut f);
            diff_axis(self.grid, self.ncomp, axis, Variant::Backward, &f, &mut b);
            for (o, v) in out.iter_mut().zip(&b) {
                *o -= v;
            }
        }
    }

    /// Symbol `(Σ_k |σ_k(θ)|^2)^m + τ`.
    pub fn symbol(&self, theta: &[f64]) -> f64 {
        let lap: f64 = theta
            .iter()
            .zip(&self.grid.h)
            .map(|(t, h)| (2.0 * (0.5 * t).sin() / h).powi(2))
            .sum();
        lap.powi(self.m as i32) + self.tau
    }
}

impl LinearOperator for PolyharmonicOperator<'_> {
    fn len(&self) -> usize {
        self.grid.len() * self.ncomp
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut cur = x.to_vec();
        for _ in 0..self.m {
            self.neg_laplacian(&cur, y);
            cur.copy_from_slice(y);
        }
        for (o, v) in y.iter_mut().zip(x) {
            *o += self.tau * v;
        }
    }

    fn constant_modes(&self) -> Option<(usize, f64)> {
        Some((self.ncomp, self.tau))
    }

    fn abs_row_bound(&self) -> Option<f64> {
        let lap: f64 = self.grid.h.iter().map(|h| 4.0 / (h * h)).sum();
        Some(lap.powi(self.m as i32) + self.tau)
    }

    fn preconditioner(&self, kind: PreconditionerKind) -> Result<Box<dyn Preconditioner + '_>> {
        match kind {
            PreconditionerKind::None => Ok(Box::new(IdentityPreconditioner)),
            PreconditionerKind::Diagonal => Ok(Box::new(DiagonalPreconditioner::new(probe_diagonal(
                self, self.grid, self.ncomp, self.m,
            ))?)),
            PreconditionerKind::MeanCoefficient => {
                let n = self.ncomp;
                let sym = move |theta: &[f64]| {
                    let s = self.symbol(theta);
                    let mut out = vec![nalgebra::Complex::new(0.0, 0.0); n * n];
                    for i in 0..n {
                        out[i * n + i] = nalgebra::Complex::new(s, 0.0);
                    }
                    out
                };
                Ok(Box::new(FftPreconditioner::new(self.grid, n, sym)?))
            }
        }
    }
}

use serde::{Deserialize, Serialize};

use super::tensor::{min_form_eigenvalue, CoeffTensor, FieldShape};
use crate::error::{Error, Result};

/// Anything that maps a point of `R^d` to a fixed-length real vector.
pub trait Evaluable: Sync {
    fn dim(&self) -> usize;

    /// Number of scalar outputs per point.
    fn ncomp(&self) -> usize;

    fn eval_into(&self, y: &[f64], out: &mut [f64]);

    fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncomp()];
        self.eval_into(y, &mut out);
        out
    }

    /// Exact mean value when it is available in closed form.
    fn exact_mean(&self) -> Option<Vec<f64>> {
        None
    }

    /// Trigonometric representation, used by fast paths.
    fn as_trig(&self) -> Option<&TrigField> {
        None
    }
}

/// A coefficient tensor field `y ↦ A(y)` with ellipticity constant `μ`.
pub trait CoefficientField: Evaluable {
    fn shape(&self) -> FieldShape;
    fn mu(&self) -> f64;
    fn name(&self) -> &str;

    /// Whether the field is constant in `y`.
    fn is_constant(&self) -> bool {
        false
    }
}

/// One term `amplitude · cos(ξ·y + phase)` of a vector-valued trigonometric sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub frequency: Vec<f64>,
    pub phase: f64,
    pub amplitude: Vec<f64>,
}

/// Vector-valued real trigonometric polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigField {
    pub d: usize,
    pub constant: Vec<f64>,
    pub modes: Vec<TrigMode>,
}

impl TrigField {
    pub fn new(d: usize, constant: Vec<f64>, modes: Vec<TrigMode>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let nc = constant.len();
        for (k, md) in modes.iter().enumerate() {
            if md.frequency.len() != d || md.amplitude.len() != nc {
                return Err(Error::ShapeMismatch(format!("mode {k} does not match field shape")));
            }
            if md.frequency.iter().chain(&md.amplitude).any(|v| !v.is_finite())
                || !md.phase.is_finite()
            {
                return Err(Error::InvalidArgument(format!("mode {k} has non-finite data")));
            }
        }
        if constant.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite constant part".into()));
        }
        Ok(TrigField { d, constant, modes })
    }

    pub fn zero(d: usize, ncomp: usize) -> Self {
        TrigField {
            d,
            constant: vec![0.0; ncomp],
            modes: Vec::new(),
        }
    }

    /// Scalar field `c + Σ a_k cos(ξ_k·y + φ_k)`.
    pub fn scalar(d: usize, c: f64, modes: &[(Vec<f64>, f64, f64)]) -> Result<Self> {
        let modes = modes
            .iter()
            .map(|(f, ph, a)| TrigMode {
                frequency: f.clone(),
                phase: *ph,
                amplitude: vec![*a],
            })
            .collect();
        TrigField::new(d, vec![c], modes)
    }

    /// `x ↦ f(x + y)`
    pub fn translated(&self, y: &[f64]) -> TrigField {
        let modes = self
            .modes
            .iter()
            .map(|md| TrigMode {
                frequency: md.frequency.clone(),
                phase: md.phase + dot(&md.frequency, y),
                amplitude: md.amplitude.clone(),
            })
            .collect();
        TrigField {
            d: self.d,
            constant: self.constant.clone(),
            modes,
        }
    }

    /// `Δ_{yz} f = f(· + y) − f(· + z)`, exact: each mode is rescaled by `|c|` and
    /// its phase advanced by `arg c`, where `c = e^{iξ·y} − e^{iξ·z}`.
    pub fn delta_yz(&self, y: &[f64], z: &[f64]) -> TrigField {
        let modes = self
            .modes
            .iter()
            .map(|md| {
                let (re, im) = shift_factor(&md.frequency, y, z);
                let mag = re.hypot(im);
                TrigMode {
                    frequency: md.frequency.clone(),
                    phase: md.phase + im.atan2(re),
                    amplitude: md.amplitude.iter().map(|a| a * mag).collect(),
                }
            })
            .collect();
        TrigField {
            d: self.d,
            constant: vec![0.0; self.constant.len()],
            modes,
        }
    }

    /// Same field with every amplitude and the constant part multiplied by `s`.
    pub fn scaled(&self, s: f64) -> TrigField {
        let mut out = self.clone();
        out.constant.iter_mut().for_each(|v| *v *= s);
        for md in &mut out.modes {
            md.amplitude.iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    pub fn is_constant(&self) -> bool {
        self.modes
            .iter()
            .all(|md| md.amplitude.iter().all(|&a| a == 0.0) || md.frequency.iter().all(|&f| f == 0.0))
    }
}

/// `e^{iξ·y} − e^{iξ·z}` as `(re, im)`.
pub(crate) fn shift_factor(xi: &[f64], y: &[f64], z: &[f64]) -> (f64, f64) {
    let (sy, cy) = dot(xi, y).sin_cos();
    let (sz, cz) = dot(xi, z).sin_cos();
    (cy - cz, sy - sz)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Evaluable for TrigField {
    fn dim(&self) -> usize {
        self.d
    }

    fn ncomp(&self) -> usize {
        self.constant.len()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.constant);
        for md in &self.modes {
            let c = (dot(&md.frequency, y) + md.phase).cos();
            for (o, a) in out.iter_mut().zip(&md.amplitude) {
                *o += a * c;
            }
        }
    }

    fn exact_mean(&self) -> Option<Vec<f64>> {
        let mut mean = self.constant.clone();
        for md in &self.modes {
            if md.frequency.iter().all(|&f| f == 0.0) {
                let c = md.phase.cos();
                for (o, a) in mean.iter_mut().zip(&md.amplitude) {
                    *o += a * c;
                }
            }
        }
        Some(mean)
    }

    fn as_trig(&self) -> Option<&TrigField> {
        Some(self)
    }
}

/// Tensor-valued mode `amplitude · cos(ξ·y + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffMode {
    pub frequency: Vec<f64>,
    pub phase: f64,
    pub amplitude: CoeffTensor,
}

/// Trigonometric coefficient field `A(y) = A_0 + Σ_k A_k cos(ξ_k·y + φ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffField {
    pub name: String,
    shape: FieldShape,
    mu: f64,
    trig: TrigField,
}

impl CoeffField {
    pub fn new(
        name: impl Into<String>,
        shape: FieldShape,
        mu: f64,
        constant: CoeffTensor,
        modes: Vec<CoeffMode>,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
        }
        let na = shape.na();
        if constant.na() != na || constant.n() != shape.n {
            return Err(Error::ShapeMismatch("constant part does not match field shape".into()));
        }
        let mut tmodes = Vec::with_capacity(modes.len());
        for md in modes {
            if md.amplitude.na() != na || md.amplitude.n() != shape.n {
                return Err(Error::ShapeMismatch("mode amplitude does not match field shape".into()));
            }
            tmodes.push(TrigMode {
                frequency: md.frequency,
                phase: md.phase,
                amplitude: md.amplitude.as_slice().to_vec(),
            });
        }
        let trig = TrigField::new(shape.d, constant.as_slice().to_vec(), tmodes)?;
        Ok(CoeffField {
            name: name.into(),
            shape,
            mu,
            trig,
        })
    }

    pub fn constant(name: impl Into<String>, shape: FieldShape, mu: f64, a: CoeffTensor) -> Result<Self> {
        CoeffField::new(name, shape, mu, a, Vec::new())
    }

    /// Scalar (`n = 1`) field `δ^{αβ}(c + Σ a_k cos(ξ_k·y + φ_k))`.
    pub fn isotropic_scalar(
        name: impl Into<String>,
        d: usize,
        m: usize,
        mu: f64,
        c: f64,
        modes: &[(Vec<f64>, f64, f64)],
    ) -> Result<Self> {
        let shape = FieldShape::new(d, m, 1)?;
        let na = shape.na();
        let modes = modes
            .iter()
            .map(|(f, ph, a)| CoeffMode {
                frequency: f.clone(),
                phase: *ph,
                amplitude: CoeffTensor::scaled_identity(na, 1, *a),
            })
            .collect();
        CoeffField::new(name, shape, mu, CoeffTensor::scaled_identity(na, 1, c), modes)
    }

    /// `a(y) = 2 + cos(2πy)` in one dimension, `μ = 1/3`.
    pub fn periodic_1d(m: usize) -> Result<Self> {
        let tau = std::f64::consts::TAU;
        CoeffField::isotropic_scalar("periodic", 1, m, 1.0 / 3.0, 2.0, &[(vec![tau], 0.0, 1.0)])
    }

    /// `a(y) = 3 + cos(2πy) + cos(2π√2 y)` in one dimension, `μ = 1/5`.
    pub fn quasi_periodic_1d(m: usize) -> Result<Self> {
        let tau = std::f64::consts::TAU;
        CoeffField::isotropic_scalar(
            "quasi-periodic",
            1,
            m,
            0.2,
            3.0,
            &[(vec![tau], 0.0, 1.0), (vec![tau * 2f64.sqrt()], 0.0, 1.0)],
        )
    }

    pub fn trig(&self) -> &TrigField {
        &self.trig
    }

    pub fn constant_part(&self) -> CoeffTensor {
        CoeffTensor::from_vec(self.shape.na(), self.shape.n, self.trig.constant.clone())
            .expect("validated at construction")
    }

    pub fn modes(&self) -> Vec<CoeffMode> {
        self.trig
            .modes
            .iter()
            .map(|md| CoeffMode {
                frequency: md.frequency.clone(),
                phase: md.phase,
                amplitude: CoeffTensor::from_vec(self.shape.na(), self.shape.n, md.amplitude.clone())
                    .expect("validated at construction"),
            })
            .collect()
    }

    pub fn eval_tensor(&self, y: &[f64]) -> CoeffTensor {
        CoeffTensor::from_vec(self.shape.na(), self.shape.n, self.trig.eval(y))
            .expect("finite trig sum")
    }

    /// `x ↦ A(x + y)`, exact.
    pub fn translated(&self, y: &[f64]) -> CoeffField {
        CoeffField {
            name: self.name.clone(),
            shape: self.shape,
            mu: self.mu,
            trig: self.trig.translated(y),
        }
    }

    /// `Δ_{yz} A`, exact.
    pub fn delta_yz(&self, y: &[f64], z: &[f64]) -> TrigField {
        self.trig.delta_yz(y, z)
    }

    /// Whether `A^{αβ}_{ij}(y) = A^{βα}_{ji}(y)` for all `y`.
    pub fn is_symmetric(&self) -> bool {
        let na = self.shape.na();
        let n = self.shape.n;
        let sym = |v: &[f64]| {
            CoeffTensor::from_vec(na, n, v.to_vec())
                .map(|t| t.is_symmetric(1e-13))
                .unwrap_or(false)
        };
        sym(&self.trig.constant) && self.trig.modes.iter().all(|md| sym(&md.amplitude))
    }
}

impl Evaluable for CoeffField {
    fn dim(&self) -> usize {
        self.shape.d
    }

    fn ncomp(&self) -> usize {
        self.trig.ncomp()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        self.trig.eval_into(y, out)
    }

    fn exact_mean(&self) -> Option<Vec<f64>> {
        self.trig.exact_mean()
    }

    fn as_trig(&self) -> Option<&TrigField> {
        Some(&self.trig)
    }
}

impl CoefficientField for CoeffField {
    fn shape(&self) -> FieldShape {
        self.shape
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn is_constant(&self) -> bool {
        self.trig.is_constant()
    }
}

/// `Ã(y) = A(y) + b(y) / (1 + |y|)` with `b` a tensor-valued trigonometric sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedField {
    pub base: CoeffField,
    pub bump: TrigField,
    mu: f64,
    name: String,
}

impl PerturbedField {
    pub fn new(base: CoeffField, bump: TrigField, mu: f64) -> Result<Self> {
        if bump.ncomp() != base.ncomp() || bump.d != base.shape().d {
            return Err(Error::ShapeMismatch("perturbation does not match base field".into()));
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
        }
        let name = format!("{}+decaying", base.name);
        Ok(PerturbedField { base, bump, mu, name })
    }

    /// The perturbation `E(y) = b(y) / (1 + |y|)` alone.
    pub fn perturbation(&self) -> FnField<impl Fn(&[f64], &mut [f64]) + Sync + '_> {
        FnField::new(self.bump.d, self.bump.ncomp(), move |y: &[f64], out: &mut [f64]| {
            self.bump.eval_into(y, out);
            let s = 1.0 / (1.0 + norm2(y));
            out.iter_mut().for_each(|v| *v *= s);
        })
    }
}

impl Evaluable for PerturbedField {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn ncomp(&self) -> usize {
        self.base.ncomp()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        self.base.eval_into(y, out);
        let mut b = vec![0.0; out.len()];
        self.bump.eval_into(y, &mut b);
        let s = 1.0 / (1.0 + norm2(y));
        for (o, v) in out.iter_mut().zip(&b) {
            *o += s * v;
        }
    }
}

impl CoefficientField for PerturbedField {
    fn shape(&self) -> FieldShape {
        self.base.shape()
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Coefficient field shifted by a fixed vector: `x ↦ F(x + y)`.
pub struct Shifted<'a, F: ?Sized> {
    pub inner: &'a F,
    pub shift: Vec<f64>,
}

impl<F: Evaluable + ?Sized> Evaluable for Shifted<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn ncomp(&self) -> usize {
        self.inner.ncomp()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        let x: Vec<f64> = y.iter().zip(&self.shift).map(|(a, b)| a + b).collect();
        self.inner.eval_into(&x, out)
    }

    fn exact_mean(&self) -> Option<Vec<f64>> {
        self.inner.exact_mean()
    }
}

impl<F: CoefficientField + ?Sized> CoefficientField for Shifted<'_, F> {
    fn shape(&self) -> FieldShape {
        self.inner.shape()
    }

    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    fn name(&self) -> &str {
        self.inner.name()
    }

    fn is_constant(&self) -> bool {
        self.inner.is_constant()
    }
}

/// `x ↦ f(x + y) − f(x + z)` for an arbitrary evaluable `f`.
pub struct Differenced<'a> {
    pub inner: &'a dyn Evaluable,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Evaluable for Differenced<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn ncomp(&self) -> usize {
        self.inner.ncomp()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let xy: Vec<f64> = x.iter().zip(&self.y).map(|(a, b)| a + b).collect();
        let xz: Vec<f64> = x.iter().zip(&self.z).map(|(a, b)| a + b).collect();
        self.inner.eval_into(&xy, out);
        let mut tmp = vec![0.0; out.len()];
        self.inner.eval_into(&xz, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o -= t;
        }
    }
}

/// Evaluable backed by a closure.
pub struct FnField<F> {
    d: usize,
    ncomp: usize,
    f: F,
    mean: Option<Vec<f64>>,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnField<F> {
    pub fn new(d: usize, ncomp: usize, f: F) -> Self {
        FnField { d, ncomp, f, mean: None }
    }

    pub fn with_mean(mut self, mean: Vec<f64>) -> Self {
        self.mean = Some(mean);
        self
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> Evaluable for FnField<F> {
    fn dim(&self) -> usize {
        self.d
    }

    fn ncomp(&self) -> usize {
        self.ncomp
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        (self.f)(y, out)
    }

    fn exact_mean(&self) -> Option<Vec<f64>> {
        self.mean.clone()
    }
}

pub(crate) fn norm2(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Result of [`check_admissible`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub bound_ok: bool,
    pub coercive_ok: bool,
    pub min_eigen: f64,
    pub max_abs: f64,
    pub samples: usize,
}

impl AdmissibilityReport {
    pub fn ok(&self) -> bool {
        self.bound_ok && self.coercive_ok
    }
}

/// Sample span and per-axis resolution used by [`check_admissible`].
fn admissibility_grid(field: &dyn CoefficientField) -> (f64, usize) {
    let d = field.shape().d;
    let min_freq = field
        .as_trig()
        .map(|t| {
            t.modes
                .iter()
                .map(|md| norm2(&md.frequency))
                .filter(|&f| f > 0.0)
                .fold(f64::INFINITY, f64::min)
        })
        .unwrap_or(std::f64::consts::TAU);
    let period = if min_freq.is_finite() {
        std::f64::consts::TAU / min_freq
    } else {
        1.0
    };
    let span = (4.0 * period).min(64.0);
    let per_dim = if d == 1 { 8192 } else { 192 };
    (span, per_dim)
}

/// Checks `|A^{αβ}_{ij}(y)| ≤ 1/μ` and pointwise coercivity `≥ μ` on a dense grid.
pub fn check_admissible(field: &dyn CoefficientField) -> Result<AdmissibilityReport> {
    let mu = field.mu();
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    let shape = field.shape();
    let (na, n, d) = (shape.na(), shape.n, shape.d);
    let (span, per_dim) = if field.is_constant() { (1.0, 1) } else { admissibility_grid(field) };
    let total = per_dim.pow(d as u32);
    let mut buf = vec![0.0; field.ncomp()];
    let mut y = vec![0.0; d];
    let mut min_eigen = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    for idx in 0..total {
        let mut r = idx;
        for yk in y.iter_mut() {
            *yk = span * (r % per_dim) as f64 / per_dim as f64;
            r /= per_dim;
        }
        field.eval_into(&y, &mut buf);
        max_abs = buf.iter().fold(max_abs, |m, v| m.max(v.abs()));
        min_eigen = min_eigen.min(min_form_eigenvalue(na, n, &buf));
    }
    let slack = 1e-12;
    Ok(AdmissibilityReport {
        bound_ok: max_abs <= (1.0 / mu) * (1.0 + slack),
        coercive_ok: min_eigen >= mu * (1.0 - slack),
        min_eigen,
        max_abs,
        samples: total,
    })
}

use serde::{Deserialize, Serialize};

use crate::apfield::{CoefficientField, Evaluable};
use crate::corrector::HomogenizedTensor;
use crate::discrete::{
    sample_evaluable, sample_on_grid, solve_spd, EllipticOperator, Grid, GridField, SampledCoeff, SolverConfig,
};
use crate::error::{Error, Result};

/// Axis-aligned box `Π (lower_k, upper_k)` with `intervals[k]` cells per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub intervals: Vec<usize>,
    /// Pinned node layers per side, normally `m`.
    pub boundary_width: usize,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, intervals: Vec<usize>, boundary_width: usize) -> Result<Self> {
        let dom = BoxDomain {
            lower,
            upper,
            intervals,
            boundary_width,
        };
        dom.grid()?;
        Ok(dom)
    }

    /// Unit interval or square with `n` cells per axis.
    pub fn unit(d: usize, n: usize, m: usize) -> Result<Self> {
        BoxDomain::new(vec![0.0; d], vec![1.0; d], vec![n; d], m)
    }

    /// Unit box whose spacing is the largest `1/n` not exceeding `h`.
    pub fn unit_with_spacing(d: usize, h: f64, m: usize) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::InvalidArgument(format!("spacing must lie in (0, 1], got {h}")));
        }
        BoxDomain::unit(d, (1.0 / h - 1e-9).ceil() as usize, m)
    }

    pub fn d(&self) -> usize {
        self.lower.len()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::pinned_box(self.lower.clone(), self.upper.clone(), self.intervals.clone(), self.boundary_width)
    }

    pub fn h_max(&self) -> f64 {
        (0..self.d())
            .map(|k| (self.upper[k] - self.lower[k]) / self.intervals[k] as f64)
            .fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `L_ε u = f` in the box with zero Dirichlet data.
pub struct DirichletProblem<'a> {
    pub field: &'a dyn CoefficientField,
    pub eps: f64,
    pub source: &'a dyn Evaluable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BvpConfig {
    pub solver: SolverConfig,
    /// Required nodes per `ε`: `h ≤ ε / resolution`.
    pub resolution: f64,
}

impl Default for BvpConfig {
    fn default() -> Self {
        BvpConfig {
            solver: SolverConfig::default(),
            resolution: 16.0,
        }
    }
}

fn check_source(source: &dyn Evaluable, d: usize, n: usize) -> Result<()> {
    if source.dim() != d || source.ncomp() != n {
        return Err(Error::ShapeMismatch(format!(
            "source is {}-dimensional with {} components, problem needs {d} and {n}",
            source.dim(),
            source.ncomp()
        )));
    }
    Ok(())
}

/// Shared solve for sampled coefficients: `f` at free nodes, zero on pinned ones.
fn solve_sampled(coeff: &SampledCoeff, source: &dyn Evaluable, grid: &Grid, cfg: &BvpConfig) -> Result<GridField> {
    check_source(source, grid.d(), coeff.shape.n)?;
    coeff.require_admissible()?;
    let n = coeff.shape.n;
    let mut rhs = sample_evaluable(source, grid, 1.0, &vec![0.0; grid.d()])?;
    for (node, pinned) in grid.pinned_mask().into_iter().enumerate() {
        if pinned {
            rhs.values[node * n..(node + 1) * n].fill(0.0);
        }
    }
    let op = EllipticOperator::new(grid, coeff, 0.0)?;
    let (x, _) = solve_spd(&op, &rhs.values, &cfg.solver)?;
    GridField::from_values(grid, n, x)
}

/// Solves `L_ε u_ε = f` with the coefficients sampled at `x / ε`.
pub fn solve_eps_problem(p: &DirichletProblem<'_>, dom: &BoxDomain, cfg: &BvpConfig) -> Result<GridField> {
    let eps = p.eps;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("ε must lie in (0, 1), got {eps}")));
    }
    let h = dom.h_max();
    if h > eps / cfg.resolution * (1.0 + 1e-9) {
        return Err(Error::ResolutionTooCoarse { eps, h });
    }
    if p.field.shape().d != dom.d() {
        return Err(Error::ShapeMismatch("field and domain dimensions differ".into()));
    }
    let grid = dom.grid()?;
    let coeff = sample_on_grid(p.field, &grid, eps, &vec![0.0; grid.d()])?;
    solve_sampled(&coeff, p.source, &grid, cfg)
}

/// Solves `L_0 u_0 = f` for the constant tensor `Â` (symmetrized).
pub fn solve_homogenized(
    ahat: &HomogenizedTensor,
    source: &dyn Evaluable,
    dom: &BoxDomain,
    cfg: &BvpConfig,
) -> Result<GridField> {
    if ahat.shape.d != dom.d() {
        return Err(Error::ShapeMismatch("tensor and domain dimensions differ".into()));
    }
    let a = ahat.ahat.symmetrized();
    let mu = a.min_form_eigenvalue().min(1.0 / a.max_abs());
    if !(mu > 0.0) {
        return Err(Error::NotAdmissible(format!("homogenized tensor is not coercive (λ_min = {mu})")));
    }
    let grid = dom.grid()?;
    let coeff = SampledCoeff::uniform(&grid, ahat.shape, mu, &a)?;
    solve_sampled(&coeff, source, &grid, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apfield::{CoeffField, CoeffTensor, FieldShape, FnField};
    use crate::discrete::{grid_norm, NormKind};
    use std::f64::consts::PI;

    fn max_err(u: &GridField, f: impl Fn(f64) -> f64) -> f64 {
        (0..u.grid.len()).fold(0.0, |m: f64, i| m.max((u.values[i] - f(u.grid.coord(i)[0])).abs()))
    }

    #[test]
    fn zero_source_gives_zero() {
        let f = CoeffField::periodic_1d(1).unwrap();
        let src = FnField::new(1, 1, |_x: &[f64], o: &mut [f64]| o[0] = 0.0);
        let dom = BoxDomain::unit(1, 256, 1).unwrap();
        let u = solve_eps_problem(&DirichletProblem { field: &f, eps: 1.0 / 8.0, source: &src }, &dom, &BvpConfig::default())
            .unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn laplace_sine_oracle_converges_at_second_order() {
        let shape = FieldShape::new(1, 1, 1).unwrap();
        let a = CoeffTensor::identity(1, 1);
        let one = HomogenizedTensor::from_constant(shape, a, "one");
        let src = FnField::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = PI * PI * (PI * x[0]).sin());
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let dom = BoxDomain::unit(1, n, 1).unwrap();
            let u = solve_homogenized(&one, &src, &dom, &BvpConfig::default()).unwrap();
            errs.push(max_err(&u, |x| (PI * x).sin()));
        }
        assert!(errs[2] < 1e-3, "{errs:?}");
        assert!(errs[1] / errs[2] > 1.8);
    }

    #[test]
    fn clamped_beam_oracle_first_order() {
        let shape = FieldShape::new(1, 2, 1).unwrap();
        let one = HomogenizedTensor::from_constant(shape, CoeffTensor::identity(1, 1), "one");
        let src = FnField::new(1, 1, |_x: &[f64], o: &mut [f64]| o[0] = 1.0);
        let exact = |x: f64| x * x * (1.0 - x) * (1.0 - x) / 24.0;
        let mut errs = Vec::new();
        for n in [64, 128, 256] {
            let dom = BoxDomain::unit(1, n, 2).unwrap();
            let u = solve_homogenized(&one, &src, &dom, &BvpConfig::default()).unwrap();
            errs.push(max_err(&u, exact));
        }
        // peak value 1/384; boundary pinning is first order
        assert!(errs[2] < 0.05 / 384.0 * 4.0, "{errs:?}");
        assert!(errs[1] / errs[2] > 1.6, "{errs:?}");
    }

    #[test]
    fn constant_field_matches_homogenized_exactly() {
        let shape = FieldShape::new(2, 1, 1).unwrap();
        let a = CoeffTensor::scaled_identity(2, 1, 1.5);
        let f = CoeffField::constant("c", shape, 0.5, a.clone()).unwrap();
        let src = FnField::new(2, 1, |x: &[f64], o: &mut [f64]| o[0] = (3.0 * x[0]).sin() + x[1]);
        let dom = BoxDomain::unit(2, 64, 1).unwrap();
        let cfg = BvpConfig::default();
        let ue = solve_eps_problem(&DirichletProblem { field: &f, eps: 0.25, source: &src }, &dom, &cfg).unwrap();
        let u0 = solve_homogenized(&HomogenizedTensor::from_constant(shape, a, "c"), &src, &dom, &cfg).unwrap();
        let mut d = ue.clone();
        d.axpy(-1.0, &u0);
        assert_eq!(grid_norm(&d, NormKind::L2).unwrap(), 0.0);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let f = CoeffField::periodic_1d(1).unwrap();
        let src = FnField::new(1, 1, |_x: &[f64], o: &mut [f64]| o[0] = 1.0);
        let dom = BoxDomain::unit(1, 64, 1).unwrap();
        let r = solve_eps_problem(&DirichletProblem { field: &f, eps: 1.0 / 8.0, source: &src }, &dom, &BvpConfig::default());
        assert!(matches!(r, Err(Error::ResolutionTooCoarse { .. })));
    }
}

use serde::{Deserialize, Serialize};

use super::operator::LinearOperator;
use super::precond::{Preconditioner, PreconditionerKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-9,
            max_iter: 20_000,
            preconditioner: PreconditionerKind::MeanCoefficient,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// True relative residual `‖Op u − rhs‖ / ‖rhs‖` of the returned solution.
    pub residual: f64,
    pub restarts: usize,
    /// Relative residual attainable in double precision, `c·u·‖|Op|‖·‖x‖/‖rhs‖`.
    /// Solves that stall below it after a restart are accepted.
    pub floor: f64,
}

/// Multiple of the unit roundoff in the attainable-residual estimate.
pub const ROUNDOFF_FACTOR: f64 = 8.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn comp_means(v: &[f64], nc: usize) -> Vec<f64> {
    let mut m = vec![0.0; nc];
    for chunk in v.chunks(nc) {
        for (a, b) in m.iter_mut().zip(chunk) {
            *a += b;
        }
    }
    let n = (v.len() / nc) as f64;
    m.iter_mut().for_each(|x| *x /= n);
    m
}

fn remove_means(v: &mut [f64], nc: usize) {
    let m = comp_means(v, nc);
    for chunk in v.chunks_mut(nc) {
        for (a, b) in chunk.iter_mut().zip(&m) {
            *a -= b;
        }
    }
}

/// Preconditioned conjugate gradients; builds the preconditioner named in `cfg`.
pub fn solve_spd(op: &dyn LinearOperator, rhs: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    let pc = op.preconditioner(cfg.preconditioner)?;
    solve_spd_with(op, pc.as_ref(), rhs, cfg)
}

/// Preconditioned conjugate gradients with a caller-supplied preconditioner.
///
/// When the operator reports exact constant eigenvectors, the constant part is
/// solved directly and CG runs on the mean-zero complement.
pub fn solve_spd_with(
    op: &dyn LinearOperator,
    pc: &dyn Preconditioner,
    rhs: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let len = op.len();
    if rhs.len() != len {
        return Err(Error::ShapeMismatch(format!("rhs has {} entries, operator {len}", rhs.len())));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("rhs has non-finite entries".into()));
    }
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; len],
            SolveReport {
                iterations: 0,
                residual: 0.0,
                restarts: 0,
                floor: 0.0,
            },
        ));
    }
    let target = cfg.rel_tol * bnorm;
    let deflate = op.constant_modes();
    let mut x = vec![0.0; len];
    let mut b = rhs.to_vec();
    let mut x_const = vec![];
    if let Some((nc, lam)) = deflate {
        let means = comp_means(&b, nc);
        let mnorm = means.iter().map(|v| v * v).sum::<f64>().sqrt() * ((len / nc) as f64).sqrt();
        if lam > 0.0 {
            x_const = means.iter().map(|v| v / lam).collect();
        } else if mnorm > target {
            return Err(Error::InvalidArgument(
                "rhs has a constant component outside the range of a singular periodic operator".into(),
            ));
        } else {
            x_const = vec![0.0; nc];
        }
        remove_means(&mut b, nc);
    }

    let mut r = b.clone();
    let mut z = vec![0.0; len];
    let mut p = vec![0.0; len];
    let mut ap = vec![0.0; len];
    let mut iterations = 0;
    let mut restarts = 0;
    let true_residual = |x: &[f64], out: &mut Vec<f64>| -> f64 {
        let mut full = x.to_vec();
        if let Some((nc, _)) = deflate {
            for chunk in full.chunks_mut(nc) {
                for (a, c) in chunk.iter_mut().zip(&x_const) {
                    *a += c;
                }
            }
        }
        let mut y = vec![0.0; len];
        op.apply(&full, &mut y);
        out.clear();
        out.extend(rhs.iter().zip(&y).map(|(a, b)| a - b));
        dot(out, out).sqrt()
    };
    let mut rtrue = Vec::with_capacity(len);
    let mut prev_res = f64::INFINITY;
    loop {
        pc.apply(&r, &mut z);
        if let Some((nc, _)) = deflate {
            remove_means(&mut z, nc);
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut rnorm = dot(&r, &r).sqrt();
        while rnorm > target {
            if iterations >= cfg.max_iter {
                let res = true_residual(&x, &mut rtrue);
                return Err(Error::NonConvergence {
                    iterations,
                    residual: res / bnorm,
                });
            }
            iterations += 1;
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::IndefiniteDetected {
                    iteration: iterations,
                    curvature: pap / dot(&p, &p).max(f64::MIN_POSITIVE),
                });
            }
            let alpha = rz / pap;
            for i in 0..len {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            pc.apply(&r, &mut z);
            if let Some((nc, _)) = deflate {
                remove_means(&mut z, nc);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
            rnorm = dot(&r, &r).sqrt();
        }
        let res = true_residual(&x, &mut rtrue);
        let floor = op.abs_row_bound().map_or(0.0, |bound| {
            let xc = x_const.iter().map(|c| c * c).sum::<f64>() * (len / x_const.len().max(1)) as f64;
            ROUNDOFF_FACTOR * f64::EPSILON * bound * (dot(&x, &x) + xc).sqrt() / bnorm
        });
        let stalled = res <= floor * bnorm && res > 0.5 * prev_res;
        if res <= target || stalled {
            if let Some((nc, _)) = deflate {
                for chunk in x.chunks_mut(nc) {
                    for (a, c) in chunk.iter_mut().zip(&x_const) {
                        *a += c;
                    }
                }
            }
            return Ok((
                x,
                SolveReport {
                    iterations,
                    residual: res / bnorm,
                    restarts,
                    floor,
                },
            ));
        }
        prev_res = res;
        restarts += 1;
        if restarts > 8 {
            return Err(Error::NonConvergence {
                iterations,
                residual: res / bnorm,
            });
        }
        r.copy_from_slice(&rtrue);
        if let Some((nc, _)) = deflate {
            remove_means(&mut r, nc);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apfield::{CoeffField, CoeffTensor, FieldShape};
    use crate::discrete::coeff::{sample_on_grid, SampledCoeff};
    use crate::discrete::grid::Grid;
    use crate::discrete::operator::EllipticOperator;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    struct Identity(usize);

    impl LinearOperator for Identity {
        fn len(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            y.copy_from_slice(x);
        }
    }

    struct Negative(usize);

    impl LinearOperator for Negative {
        fn len(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            y.iter_mut().zip(x).for_each(|(a, b)| *a = -b);
        }
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let rhs = vec![1.0, -2.0, 3.0];
        let (u, rep) = solve_spd(&Identity(3), &rhs, &SolverConfig::default()).unwrap();
        assert_eq!(u, rhs);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (u, rep) = solve_spd(&Identity(4), &[0.0; 4], &SolverConfig::default()).unwrap();
        assert_eq!(u, vec![0.0; 4]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn indefinite_and_nonconvergence_are_reported() {
        let r = solve_spd(&Negative(3), &[1.0, 0.0, 0.0], &SolverConfig::default());
        assert!(matches!(r, Err(Error::IndefiniteDetected { .. })));

        let g = Grid::torus(1, 1.0, 64).unwrap();
        let f = CoeffField::periodic_1d(1).unwrap();
        let c = sample_on_grid(&f, &g, 0.25, &[0.0]).unwrap();
        let op = EllipticOperator::new(&g, &c, 1e-3).unwrap();
        let rhs: Vec<f64> = (0..64).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let cfg = SolverConfig {
            rel_tol: 1e-12,
            max_iter: 2,
            preconditioner: PreconditionerKind::None,
        };
        assert!(matches!(solve_spd(&op, &rhs, &cfg), Err(Error::NonConvergence { iterations: 2, .. })));
    }

    #[test]
    fn shifted_laplacian_recovers_sine_mode() {
        let ext = 2.0;
        let n = 64;
        let g = Grid::torus(1, ext, n).unwrap();
        let shape = FieldShape::new(1, 1, 1).unwrap();
        let c = SampledCoeff::uniform(&g, shape, 1.0, &CoeffTensor::identity(1, 1)).unwrap();
        let op = EllipticOperator::new(&g, &c, 1.0).unwrap();
        let h = g.h[0];
        let k = 2.0;
        let lam = (2.0 / h * (std::f64::consts::PI * h * k / ext).sin()).powi(2);
        let mode: Vec<f64> = (0..n).map(|i| (TAU * k * i as f64 * h / ext).sin()).collect();
        let rhs: Vec<f64> = mode.iter().map(|v| (lam + 1.0) * v).collect();
        for kind in [PreconditionerKind::None, PreconditionerKind::Diagonal, PreconditionerKind::MeanCoefficient] {
            let cfg = SolverConfig {
                preconditioner: kind,
                ..SolverConfig::default()
            };
            let (u, rep) = solve_spd(&op, &rhs, &cfg).unwrap();
            assert!(rep.residual <= 1e-9);
            let err = u.iter().zip(&mode).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-8, "{kind:?}: {err}");
        }
    }

    #[test]
    fn constant_part_is_solved_exactly() {
        let g = Grid::torus(1, 4.0, 32).unwrap();
        let f = CoeffField::quasi_periodic_1d(1).unwrap();
        let c = sample_on_grid(&f, &g, 1.0, &[0.0]).unwrap();
        let op = EllipticOperator::new(&g, &c, 0.25).unwrap();
        let (u, _) = solve_spd(&op, &vec![1.0; 32], &SolverConfig::default()).unwrap();
        assert!(u.iter().all(|v| (v - 4.0).abs() < 1e-12));

        let singular = EllipticOperator::new(&g, &c, 0.0).unwrap();
        assert!(solve_spd(&singular, &vec![1.0; 32], &SolverConfig::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residual_contract_holds(seed in 0u64..1000, tol_exp in 4i32..11, m in 1usize..3) {
            let g = Grid::torus(1, 3.0, 48).unwrap();
            let f = CoeffField::quasi_periodic_1d(m).unwrap();
            let c = sample_on_grid(&f, &g, 0.5, &[seed as f64 * 0.01]).unwrap();
            let op = EllipticOperator::new(&g, &c, 0.1).unwrap();
            let rhs: Vec<f64> = (0..48).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
            let cfg = SolverConfig::default().with_tol(10f64.powi(-tol_exp));
            let (u, rep) = solve_spd(&op, &rhs, &cfg).unwrap();
            let mut y = vec![0.0; 48];
            op.apply(&u, &mut y);
            let res = y.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(res / bn <= cfg.rel_tol * (1.0 + 1e-6));
            prop_assert!((rep.residual - res / bn).abs() <= 1e-3 * cfg.rel_tol);
        }
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{dot, norm2, CoeffField, CoefficientField, Evaluable, TrigField};
use super::sampling::{low_discrepancy, BallQuadrature, SamplerConfig};
use crate::error::{Error, Result};
use crate::fit::{power_law, PowerLawFit};

/// Values of `ρ_k` at or below this are treated as exact zeros.
pub const RHO_ZERO: f64 = 1e-8;

/// Largest supported order of nested differences.
pub const MAX_DIFFERENCE_ORDER: usize = 3;

type Pair = (Vec<f64>, Vec<f64>);

/// `(⨍ |f|^p)^{1/p}` from pointwise magnitudes and averaging weights.
fn lp_average(mags: impl Iterator<Item = (f64, f64)>, p: f64) -> f64 {
    let s: f64 = mags.map(|(w, v)| w * v.powf(p)).sum();
    s.max(0.0).powf(1.0 / p)
}

fn ball_average_at(f: &dyn Evaluable, x: &[f64], q: &BallQuadrature, p: f64, buf: &mut [f64], pt: &mut [f64]) -> f64 {
    lp_average(
        q.nodes.iter().zip(&q.weights).map(|(node, &w)| {
            for ((o, a), b) in pt.iter_mut().zip(x).zip(node) {
                *o = a + b;
            }
            f.eval_into(pt, buf);
            (w, norm2(buf))
        }),
        p,
    )
}

/// Estimate of `‖f‖_{S^p_R} = sup_x (⨍_{B(x,R)} |f|^p)^{1/p}` over the sampled centres.
pub fn norm_spr(f: &dyn Evaluable, p: f64, r: f64, cfg: &SamplerConfig) -> Result<f64> {
    check_p(p)?;
    cfg.validate()?;
    let d = f.dim();
    let q = BallQuadrature::new(d, r, cfg)?;
    let centers = low_discrepancy(d, cfg.center_samples, cfg.window, cfg.seed);
    let nc = f.ncomp();
    Ok(centers
        .par_iter()
        .map(|x| {
            let mut buf = vec![0.0; nc];
            let mut pt = vec![0.0; d];
            ball_average_at(f, x, &q, p, &mut buf, &mut pt)
        })
        .reduce(|| 0.0, f64::max))
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent p must be in [1, ∞), got {p}")));
    }
    Ok(())
}

/// Mean value with an error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: Vec<f64>,
    /// `|⨍_{B(0,R)} f − ⨍_{B(0,R/2)} f|` on the quadrature path, zero when exact.
    pub error: f64,
    pub exact: bool,
}

/// `⟨f⟩`: exact for trigonometric sums, otherwise the ball average over `B(0, R_max)`.
pub fn mean_value(f: &dyn Evaluable, r_max: f64, cfg: &SamplerConfig) -> Result<MeanEstimate> {
    if !(r_max > 0.0) {
        return Err(Error::InvalidArgument(format!("R_max must be positive, got {r_max}")));
    }
    if let Some(value) = f.exact_mean() {
        return Ok(MeanEstimate {
            value,
            error: 0.0,
            exact: true,
        });
    }
    let d = f.dim();
    let avg = |r: f64| -> Result<Vec<f64>> {
        let q = BallQuadrature::new(d, r, cfg)?;
        let mut acc = vec![0.0; f.ncomp()];
        let mut buf = vec![0.0; f.ncomp()];
        for (node, &w) in q.nodes.iter().zip(&q.weights) {
            f.eval_into(node, &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += w * b;
            }
        }
        Ok(acc)
    };
    let full = avg(r_max)?;
    let half = avg(0.5 * r_max)?;
    let error = full
        .iter()
        .zip(&half)
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    Ok(MeanEstimate {
        value: full,
        error,
        exact: false,
    })
}

/// Precomputed `e^{iξ·(x + node)}` for every mode, centre and node of a trig field.
struct TrigPlan<'a> {
    field: &'a TrigField,
    weights: Vec<f64>,
    /// `[mode][center * nodes + node]`
    phases: Vec<Vec<(f64, f64)>>,
    centers: usize,
    nodes: usize,
}

impl<'a> TrigPlan<'a> {
    fn new(field: &'a TrigField, r: f64, cfg: &SamplerConfig) -> Result<Self> {
        let q = BallQuadrature::new(field.d, r, cfg)?;
        let centers = low_discrepancy(field.d, cfg.center_samples, cfg.window, cfg.seed);
        let phases = field
            .modes
            .iter()
            .map(|md| {
                let mut v = Vec::with_capacity(centers.len() * q.len());
                for c in &centers {
                    let base = dot(&md.frequency, c);
                    for node in &q.nodes {
                        let (s, co) = (base + dot(&md.frequency, node)).sin_cos();
                        v.push((co, s));
                    }
                }
                v
            })
            .collect();
        let nodes = q.len();
        Ok(TrigPlan {
            field,
            weights: q.weights,
            phases,
            centers: centers.len(),
            nodes,
        })
    }

    /// `S^p_R` norm of `Δ_Q f` for the pairs in `q`; the empty set gives `f` itself.
    fn norm(&self, q: &[&Pair], p: f64) -> f64 {
        let nm = self.field.modes.len();
        let nc = self.field.constant.len();
        let coef: Vec<(f64, f64)> = self
            .field
            .modes
            .iter()
            .map(|md| {
                let mut c = (md.phase.cos(), md.phase.sin());
                for (y, z) in q {
                    let (re, im) = super::field::shift_factor(&md.frequency, y, z);
                    c = (c.0 * re - c.1 * im, c.0 * im + c.1 * re);
                }
                c
            })
            .collect();
        let constant: Vec<f64> = if q.is_empty() {
            self.field.constant.clone()
        } else {
            vec![0.0; nc]
        };
        let mut best: f64 = 0.0;
        let mut val = vec![0.0; nc];
        let mut r = vec![0.0; nm];
        for c in 0..self.centers {
            let mut acc = 0.0;
            for k in 0..self.nodes {
                let idx = c * self.nodes + k;
                for (m, rm) in r.iter_mut().enumerate() {
                    let (ec, es) = self.phases[m][idx];
                    *rm = coef[m].0 * ec - coef[m].1 * es;
                }
                val.copy_from_slice(&constant);
                for (m, md) in self.field.modes.iter().enumerate() {
                    for (v, a) in val.iter_mut().zip(&md.amplitude) {
                        *v += a * r[m];
                    }
                }
                acc += self.weights[k] * norm2(&val).powf(p);
            }
            best = best.max(acc.max(0.0).powf(1.0 / p));
        }
        best
    }
}

/// Norms of nested differences, either exactly for trig sums or by brute force.
enum DiffNorm<'a> {
    Trig(TrigPlan<'a>),
    Generic {
        f: &'a dyn Evaluable,
        quad: BallQuadrature,
        centers: Vec<Vec<f64>>,
    },
}

impl<'a> DiffNorm<'a> {
    fn new(f: &'a dyn Evaluable, r: f64, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(t) = f.as_trig() {
            return Ok(DiffNorm::Trig(TrigPlan::new(t, r, cfg)?));
        }
        Ok(DiffNorm::Generic {
            f,
            quad: BallQuadrature::new(f.dim(), r, cfg)?,
            centers: low_discrepancy(f.dim(), cfg.center_samples, cfg.window, cfg.seed),
        })
    }

    fn norm(&self, q: &[&Pair], p: f64) -> f64 {
        match self {
            DiffNorm::Trig(plan) => plan.norm(q, p),
            DiffNorm::Generic { f, quad, centers } => {
                let d = f.dim();
                let nc = f.ncomp();
                let k = q.len();
                let mut buf = vec![0.0; nc];
                let mut val = vec![0.0; nc];
                let mut pt = vec![0.0; d];
                let mut best: f64 = 0.0;
                for x in centers {
                    let mut acc = 0.0;
                    for (node, &w) in quad.nodes.iter().zip(&quad.weights) {
                        val.iter_mut().for_each(|v| *v = 0.0);
                        for mask in 0..(1usize << k) {
                            let mut sign = 1.0;
                            for i in 0..d {
                                pt[i] = x[i] + node[i];
                            }
                            for (j, (y, z)) in q.iter().enumerate() {
                                let s = if mask >> j & 1 == 1 {
                                    y
                                } else {
                                    sign = -sign;
                                    z
                                };
                                for i in 0..d {
                                    pt[i] += s[i];
                                }
                            }
                            f.eval_into(&pt, &mut buf);
                            for (v, b) in val.iter_mut().zip(&buf) {
                                *v += sign * b;
                            }
                        }
                        acc += w * norm2(&val).powf(p);
                    }
                    best = best.max(acc.max(0.0).powf(1.0 / p));
                }
                best
            }
        }
    }
}

/// Lattice of shifts `z = y − j/s`, `j ∈ Z^d`, with `|z| ≤ L`.
fn shift_lattice(y: &[f64], l: f64, s: usize) -> Vec<Vec<f64>> {
    let s = s as f64;
    let d = y.len();
    let ranges: Vec<(i64, i64)> = y
        .iter()
        .map(|&yk| (((yk - l) * s).ceil() as i64, ((yk + l) * s).floor() as i64))
        .collect();
    let mut out = Vec::new();
    let mut j: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|r| r.0 > r.1) {
        return out;
    }
    loop {
        let z: Vec<f64> = (0..d).map(|k| y[k] - j[k] as f64 / s).collect();
        if norm2(&z) <= l * (1.0 + 1e-12) {
            out.push(z);
        }
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            j[k] += 1;
            if j[k] <= ranges[k].1 {
                break;
            }
            j[k] = ranges[k].0;
            k += 1;
        }
    }
}

/// `inf_{|z| ≤ L} g(z)` over the shift lattice, then local zooms around the best point.
fn inf_over_shifts(y: &[f64], l: f64, cfg: &SamplerConfig, g: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut best_z: Option<Vec<f64>> = None;
    for z in shift_lattice(y, l, cfg.shift_candidates) {
        let v = g(&z);
        if v < best {
            best = v;
            best_z = Some(z);
        }
    }
    let Some(mut center) = best_z else {
        return best;
    };
    let d = y.len();
    let mut step = 1.0 / cfg.shift_candidates as f64;
    for _ in 0..cfg.refine_rounds {
        if best == 0.0 {
            break;
        }
        let sub = step / 4.0;
        let total = 9usize.pow(d as u32);
        let origin = center.clone();
        for idx in 0..total {
            let mut r = idx;
            let z: Vec<f64> = (0..d)
                .map(|k| {
                    let o = (r % 9) as f64 - 4.0;
                    r /= 9;
                    origin[k] + o * sub
                })
                .collect();
            if norm2(&z) > l {
                continue;
            }
            let v = g(&z);
            if v < best {
                best = v;
                center = z;
            }
        }
        step = sub;
    }
    best
}

/// Nested `sup_{y_1} inf_{|z_1|≤L} ⋯ sup_{y_k} inf_{|z_k|≤L} objective(P)`.
fn nested_sup_inf(
    k: usize,
    l: f64,
    cfg: &SamplerConfig,
    ys: &[Vec<f64>],
    objective: &(dyn Fn(&[Pair]) -> f64 + Sync),
) -> f64 {
    fn rec(
        depth: usize,
        k: usize,
        l: f64,
        cfg: &SamplerConfig,
        ys: &[Vec<f64>],
        pairs: &mut Vec<Pair>,
        objective: &(dyn Fn(&[Pair]) -> f64 + Sync),
    ) -> f64 {
        if depth == k {
            return objective(pairs);
        }
        let mut sup: f64 = 0.0;
        for y in ys {
            let inf = inf_over_shifts(y, l, cfg, &mut |z| {
                pairs.push((y.clone(), z.to_vec()));
                let v = rec(depth + 1, k, l, cfg, ys, pairs, objective);
                pairs.pop();
                v
            });
            sup = sup.max(inf);
        }
        sup
    }
    ys.par_iter()
        .map(|y| {
            let mut pairs = Vec::with_capacity(k);
            inf_over_shifts(y, l, cfg, &mut |z| {
                pairs.push((y.clone(), z.to_vec()));
                let v = rec(1, k, l, cfg, ys, &mut pairs, objective);
                pairs.pop();
                v
            })
        })
        .reduce(|| 0.0, f64::max)
}

fn check_order(k: usize, l: f64, r: f64) -> Result<()> {
    if k == 0 || k > MAX_DIFFERENCE_ORDER {
        return Err(Error::Unsupported(format!(
            "difference order k = {k} (supported: 1..={MAX_DIFFERENCE_ORDER})"
        )));
    }
    if !(l > 0.0 && r > 0.0) {
        return Err(Error::InvalidArgument(format!("L and R must be positive (L={l}, R={r})")));
    }
    Ok(())
}

fn y_samples(d: usize, cfg: &SamplerConfig) -> Vec<Vec<f64>> {
    low_discrepancy(d, cfg.y_samples, cfg.window, cfg.seed.wrapping_add(0x9e37_79b9))
}

/// Sampled `ω_k(f; L, R)`: sup stages are biased low, inf stages biased high.
pub fn omega_k(f: &dyn Evaluable, k: usize, l: f64, r: f64, cfg: &SamplerConfig) -> Result<f64> {
    check_order(k, l, r)?;
    let plan = DiffNorm::new(f, r, cfg)?;
    let ys = y_samples(f.dim(), cfg);
    let objective = |pairs: &[Pair]| {
        let refs: Vec<&Pair> = pairs.iter().collect();
        plan.norm(&refs, 2.0)
    };
    Ok(nested_sup_inf(k, l, cfg, &ys, &objective))
}

/// All set partitions of `{0, …, k−1}`.
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    fn rec(i: usize, k: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, k, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, k, cur, out);
        cur.pop();
    }
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

/// Sampled `ρ_k(L, R)`: nested sup/inf of `Σ_partitions Π_j ‖Δ_{Q_j} A‖_{S^p_R}`.
pub fn rho_k(field: &CoeffField, k: usize, l: f64, r: f64, p: f64, cfg: &SamplerConfig) -> Result<f64> {
    check_order(k, l, r)?;
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho_k needs p >= 2, got {p}")));
    }
    let plan = TrigPlan::new(field.trig(), r, cfg)?;
    cfg.validate()?;
    let parts = set_partitions(k);
    let ys = y_samples(field.shape().d, cfg);
    let objective = |pairs: &[Pair]| {
        let mut cache = vec![f64::NAN; 1 << pairs.len()];
        let mut subset_norm = |blk: &[usize]| {
            let mask = blk.iter().fold(0usize, |m, &i| m | 1 << i);
            if cache[mask].is_nan() {
                let refs: Vec<&Pair> = blk.iter().map(|&i| &pairs[i]).collect();
                cache[mask] = plan.norm(&refs, p);
            }
            cache[mask]
        };
        parts
            .iter()
            .map(|part| part.iter().map(|blk| subset_norm(blk)).product::<f64>())
            .sum()
    };
    Ok(nested_sup_inf(k, l, cfg, &ys, &objective))
}

/// Anything that can report `ρ_k(L, R)`; lets the fit run on synthetic inputs.
pub trait RhoSource: Sync {
    fn rho(&self, k: usize, l: f64, r: f64, p: f64, cfg: &SamplerConfig) -> Result<f64>;
}

impl RhoSource for CoeffField {
    fn rho(&self, k: usize, l: f64, r: f64, p: f64, cfg: &SamplerConfig) -> Result<f64> {
        rho_k(self, k, l, r, p, cfg)
    }
}

/// Stub source returning `c · L^{−θ}` (independent of `R`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRho {
    pub c: f64,
    pub theta: f64,
}

impl RhoSource for SyntheticRho {
    fn rho(&self, k: usize, l: f64, r: f64, _p: f64, _cfg: &SamplerConfig) -> Result<f64> {
        check_order(k, l, r)?;
        Ok(self.c * l.powf(-self.theta))
    }
}

/// Decay exponent of `ρ_k(L, L) ≤ C L^{−θ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    /// `+∞` when every `ρ` value vanishes.
    pub theta: f64,
    pub residual: f64,
    pub l_values: Vec<f64>,
    pub rho: Vec<f64>,
    pub fit: Option<PowerLawFit>,
}

/// Fits `θ` from already-computed `ρ_k(L, L)` values.
pub fn fit_theta(l_values: &[f64], rho: &[f64]) -> Result<ThetaFit> {
    if l_values.len() < 3 {
        return Err(Error::InvalidArgument("need at least three values of L".into()));
    }
    if l_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("L values must be increasing".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = l_values
        .iter()
        .zip(rho)
        .filter(|(_, &r)| r > RHO_ZERO)
        .map(|(&l, &r)| (l, r))
        .unzip();
    if xs.len() < 2 {
        return Ok(ThetaFit {
            theta: f64::INFINITY,
            residual: 0.0,
            l_values: l_values.to_vec(),
            rho: rho.to_vec(),
            fit: None,
        });
    }
    let fit = power_law(&xs, &ys)?;
    Ok(ThetaFit {
        theta: -fit.exponent,
        residual: fit.residual,
        l_values: l_values.to_vec(),
        rho: rho.to_vec(),
        fit: Some(fit),
    })
}

/// Computes `ρ_k(L, L)` along `l_values` and fits the decay exponent.
pub fn fit_rho_decay(
    source: &dyn RhoSource,
    k: usize,
    l_values: &[f64],
    p: f64,
    cfg: &SamplerConfig,
) -> Result<ThetaFit> {
    let rho = l_values
        .iter()
        .map(|&l| source.rho(k, l, l, p, cfg))
        .collect::<Result<Vec<f64>>>()?;
    fit_theta(l_values, &rho)
}

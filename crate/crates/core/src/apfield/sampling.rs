use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling budget for sup/inf approximations and ball averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Number of ball centres `x` in the sup defining `S^p_R`.
    pub center_samples: usize,
    /// Shift candidates per unit length on the `z` lattice.
    pub shift_candidates: usize,
    /// Gauss–Legendre points per panel and direction.
    pub ball_quadrature: usize,
    pub seed: u64,
    /// Side of the box `[0, window]^d` holding centres and `y` samples.
    pub window: f64,
    /// Number of `y` samples in each sup stage of `ω_k`, `ρ_k`.
    pub y_samples: usize,
    /// Zoom rounds around the best `z` lattice point.
    pub refine_rounds: usize,
    /// Panel length of the composite quadrature.
    pub panel_length: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            center_samples: 32,
            shift_candidates: 16,
            ball_quadrature: 16,
            seed: 0,
            window: 16.0,
            y_samples: 16,
            refine_rounds: 2,
            panel_length: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.center_samples == 0 || self.shift_candidates == 0 || self.ball_quadrature == 0 || self.y_samples == 0
        {
            return Err(Error::InvalidArgument("sampler counts must be at least 1".into()));
        }
        if !(self.window > 0.0 && self.panel_length > 0.0) {
            return Err(Error::InvalidArgument("window and panel_length must be positive".into()));
        }
        Ok(())
    }
}

/// Generalised golden ratio: the positive root of `x^{d+1} = x + 1`.
fn harmonious(d: usize) -> f64 {
    let mut x: f64 = 2.0;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

/// First `count` points of a randomly shifted `R_d` sequence in `[0, window]^d`.
/// The origin always comes first and prefixes are nested.
pub fn low_discrepancy(d: usize, count: usize, window: f64, seed: u64) -> Vec<Vec<f64>> {
    let g = harmonious(d);
    let alpha: Vec<f64> = (1..=d).map(|k| g.powi(-(k as i32))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|i| {
            if i == 0 {
                return vec![0.0; d];
            }
            (0..d)
                .map(|k| window * (shift[k] + i as f64 * alpha[k]).fract())
                .collect()
        })
        .collect()
}

/// Composite Gauss–Legendre nodes on `[a, b]` with panels of length about `panel`.
pub fn composite_gauss(a: f64, b: f64, per_panel: usize, panel: f64) -> Vec<(f64, f64)> {
    let panels = (((b - a) / panel).ceil() as usize).max(1);
    let rule = GaussLegendre::new(NonZeroUsize::new(per_panel.max(1)).expect("nonzero"));
    let pairs = rule.as_node_weight_pairs();
    let w = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * pairs.len());
    for p in 0..panels {
        let lo = a + p as f64 * w;
        for &(x, wt) in pairs {
            out.push((lo + 0.5 * w * (x + 1.0), 0.5 * w * wt));
        }
    }
    out
}

/// Offsets and weights of an averaging rule on `B(0, R)`; weights sum to one.
#[derive(Debug, Clone)]
pub struct BallQuadrature {
    pub radius: f64,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl BallQuadrature {
    /// Tensor Gauss rule in 1-D, polar Gauss × trapezoid in 2-D, product
    /// Gauss on the cube with indicator otherwise.
    pub fn new(d: usize, radius: f64, cfg: &SamplerConfig) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        let q = cfg.ball_quadrature;
        let (nodes, mut weights): (Vec<Vec<f64>>, Vec<f64>) = match d {
            1 => composite_gauss(-radius, radius, q, cfg.panel_length)
                .into_iter()
                .map(|(x, w)| (vec![x], w))
                .unzip(),
            2 => {
                let radial = composite_gauss(0.0, radius, q, cfg.panel_length);
                let n_ang = (q.max(8) as f64 * (std::f64::consts::TAU * radius / cfg.panel_length).max(1.0)).ceil()
                    as usize;
                let n_ang = n_ang.min(4096);
                let dth = std::f64::consts::TAU / n_ang as f64;
                let mut nodes = Vec::with_capacity(radial.len() * n_ang);
                let mut weights = Vec::with_capacity(radial.len() * n_ang);
                for &(r, wr) in &radial {
                    for k in 0..n_ang {
                        let th = k as f64 * dth;
                        nodes.push(vec![r * th.cos(), r * th.sin()]);
                        weights.push(wr * r * dth);
                    }
                }
                (nodes, weights)
            }
            _ => {
                let line = composite_gauss(-radius, radius, q, cfg.panel_length);
                let total = line.len().pow(d as u32);
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for idx in 0..total {
                    let mut r = idx;
                    let mut x = Vec::with_capacity(d);
                    let mut w = 1.0;
                    for _ in 0..d {
                        let (xk, wk) = line[r % line.len()];
                        r /= line.len();
                        x.push(xk);
                        w *= wk;
                    }
                    if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                        nodes.push(x);
                        weights.push(w);
                    }
                }
                (nodes, weights)
            }
        };
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(BallQuadrature {
            radius,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_discrepancy_is_nested_and_starts_at_origin() {
        let a = low_discrepancy(2, 10, 4.0, 7);
        let b = low_discrepancy(2, 20, 4.0, 7);
        assert_eq!(a[..], b[..10]);
        assert_eq!(a[0], vec![0.0, 0.0]);
        assert!(b.iter().flatten().all(|&v| (0.0..4.0).contains(&v)));
        assert_ne!(low_discrepancy(1, 3, 1.0, 1), low_discrepancy(1, 3, 1.0, 2));
    }

    #[test]
    fn harmonious_numbers() {
        assert!((harmonious(1) - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let g = harmonious(2);
        assert!((g.powi(3) - g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_rules_integrate_polynomials() {
        let cfg = SamplerConfig::default();
        // ⨍_{[-R,R]} x^2 = R^2/3
        let q = BallQuadrature::new(1, 2.5, &cfg).unwrap();
        let m2: f64 = q.nodes.iter().zip(&q.weights).map(|(x, w)| w * x[0] * x[0]).sum();
        assert!((m2 - 2.5f64.powi(2) / 3.0).abs() < 1e-12);
        // ⨍_{B_R} |x|^2 = R^2/2 in 2-D
        let q = BallQuadrature::new(2, 1.5, &cfg).unwrap();
        let m2: f64 = q
            .nodes
            .iter()
            .zip(&q.weights)
            .map(|(x, w)| w * (x[0] * x[0] + x[1] * x[1]))
            .sum();
        assert!((m2 - 1.5f64.powi(2) / 2.0).abs() < 1e-12);
        assert!(BallQuadrature::new(1, 0.0, &cfg).is_err());
    }
}

use serde::{Deserialize, Serialize};
use std::fmt;

/// Exponent tuple `(α_1, …, α_d)` of a partial derivative `D^α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    /// `e_k` scaled by `power`.
    pub fn axis(d: usize, k: usize, power: usize) -> Self {
        let mut e = vec![0; d];
        e[k] = power;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|α| = Σ α_k`
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    /// `α!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(|k| k as f64).product::<f64>())
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of dimension `d` and order exactly `order`, in
/// ascending lexicographic order of the exponent tuples.
///
/// This enumeration fixes the `α`/`β` slot order of every coefficient tensor
/// in the crate: for `d = 2, m = 2` it is `(0,2), (1,1), (2,0)`.
pub fn multi_indices(d: usize, order: usize) -> Vec<MultiIndex> {
    fn rec(d: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == d {
            prefix.push(left);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in 0..=left {
            prefix.push(a);
            rec(d, left - a, prefix, out);
            prefix.pop();
        }
    }
    if d == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    rec(d, order, &mut Vec::with_capacity(d), &mut out);
    out
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::field::{CoeffField, CoeffMode};
use super::tensor::{CoeffTensor, FieldShape};
use crate::error::{Error, Result};

/// Tensor entries given either in full (row-major `(α, β, i, j)`) or as a
/// multiple of the identity `c δ^{αβ} δ_{ij}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorSpec {
    Scalar(f64),
    Entries(Vec<f64>),
}

impl TensorSpec {
    pub fn build(&self, na: usize, n: usize) -> Result<CoeffTensor> {
        match self {
            TensorSpec::Scalar(c) => Ok(CoeffTensor::scaled_identity(na, n, *c)),
            TensorSpec::Entries(v) => CoeffTensor::from_vec(na, n, v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    /// Angular frequency `ξ` (radians per unit length).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<Vec<f64>>,
    /// Frequency in cycles per unit length, `ξ = 2π · cycles`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<f64>>,
    #[serde(default)]
    pub phase: f64,
    pub amplitude: TensorSpec,
}

/// Coefficient field description as read from a TOML `[field]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub d: usize,
    pub m: usize,
    #[serde(default = "one")]
    pub n: usize,
    pub mu: f64,
    pub constant: TensorSpec,
    #[serde(default)]
    pub modes: Vec<ModeConfig>,
}

fn default_name() -> String {
    "field".into()
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
struct Wrapper {
    field: FieldConfig,
}

impl FieldConfig {
    pub fn build(&self) -> Result<CoeffField> {
        let shape = FieldShape::new(self.d, self.m, self.n)?;
        let na = shape.na();
        let constant = self.constant.build(na, self.n)?;
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(k, md)| {
                let frequency = match (&md.frequency, &md.cycles) {
                    (Some(f), None) => f.clone(),
                    (None, Some(c)) => c.iter().map(|v| std::f64::consts::TAU * v).collect(),
                    _ => {
                        return Err(Error::Config(format!(
                            "mode {k}: give exactly one of `frequency` or `cycles`"
                        )))
                    }
                };
                if frequency.len() != self.d {
                    return Err(Error::Config(format!("mode {k}: frequency must have {} entries", self.d)));
                }
                Ok(CoeffMode {
                    frequency,
                    phase: md.phase,
                    amplitude: md.amplitude.build(na, self.n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CoeffField::new(self.name.clone(), shape, self.mu, constant, modes)
    }

    /// Parses a document whose top level holds a `[field]` table.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let w: Wrapper = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Ok(w.field)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    /// Inverse of [`FieldConfig::build`] with every tensor spelled out.
    pub fn from_field(f: &CoeffField) -> Self {
        use super::field::CoefficientField;
        let shape = f.shape();
        FieldConfig {
            name: f.name.clone(),
            d: shape.d,
            m: shape.m,
            n: shape.n,
            mu: f.mu(),
            constant: TensorSpec::Entries(f.constant_part().as_slice().to_vec()),
            modes: f
                .modes()
                .into_iter()
                .map(|md| ModeConfig {
                    frequency: Some(md.frequency),
                    cycles: None,
                    phase: md.phase,
                    amplitude: TensorSpec::Entries(md.amplitude.as_slice().to_vec()),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apfield::field::Evaluable;

    #[test]
    fn parses_scalar_shortcuts() {
        let doc = r#"
[field]
name = "qp"
d = 1
m = 2
mu = 0.2
constant = 3.0

[[field.modes]]
cycles = [1.0]
amplitude = 1.0

[[field.modes]]
cycles = [1.4142135623730951]
amplitude = 1.0
"#;
        let f = FieldConfig::from_toml_str(doc).unwrap().build().unwrap();
        assert_eq!(f, {
            let mut g = CoeffField::quasi_periodic_1d(2).unwrap();
            g.name = "qp".into();
            g
        });
        assert_eq!(f.eval(&[0.0]), vec![5.0]);
    }

    #[test]
    fn full_tensor_entries_and_roundtrip() {
        let doc = r#"
[field]
d = 2
m = 1
n = 1
mu = 0.25
constant = [2.0, 0.5, 0.5, 2.0]

[[field.modes]]
frequency = [6.283185307179586, 0.0]
phase = 0.5
amplitude = [0.5, 0.0, 0.0, 0.5]
"#;
        let cfg = FieldConfig::from_toml_str(doc).unwrap();
        let f = cfg.build().unwrap();
        assert_eq!(f.constant_part().get(0, 1, 0, 0), 0.5);
        let back = FieldConfig::from_field(&f).build().unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn config_errors() {
        let both = "[field]\nd=1\nm=1\nmu=1\nconstant=1.0\n[[field.modes]]\ncycles=[1.0]\nfrequency=[1.0]\namplitude=1.0\n";
        assert!(FieldConfig::from_toml_str(both).unwrap().build().is_err());
        let short = "[field]\nd=2\nm=1\nmu=1\nconstant=[1.0, 2.0]\n";
        assert!(FieldConfig::from_toml_str(short).unwrap().build().is_err());
        assert!(FieldConfig::from_toml_str("[field]\nd=1\n").is_err());
    }
}

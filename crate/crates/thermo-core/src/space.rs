//! Observations, datasets and parameter spaces.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An ordered list of samples of common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("observation dimension must be positive".into()));
        }
        if values.is_empty() || values.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "dataset of {} values does not split into samples of dimension {dim}",
                values.len()
            )));
        }
        Ok(Dataset { dim, values })
    }

    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Dataset::new(1, values)
    }

    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let dim = samples.first().map(|s| s.len()).unwrap_or(0);
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::InvalidInput("samples differ in dimension".into()));
        }
        Dataset::new(dim, samples.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    /// First `n` samples.
    pub fn prefix(&self, n: usize) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidInput(format!("prefix {n} of a dataset of size {}", self.len())));
        }
        Ok(Dataset { dim: self.dim, values: self.values[..n * self.dim].to_vec() })
    }

    /// The dataset with sample `i` removed.
    pub fn without(&self, i: usize) -> Result<Dataset> {
        if self.len() < 2 || i >= self.len() {
            return Err(Error::InvalidInput("leave-one-out needs at least two samples".into()));
        }
        let mut v = Vec::with_capacity(self.values.len() - self.dim);
        v.extend_from_slice(&self.values[..i * self.dim]);
        v.extend_from_slice(&self.values[(i + 1) * self.dim..]);
        Ok(Dataset { dim: self.dim, values: v })
    }

    /// The dataset with one sample appended.
    pub fn with(&self, x: &[f64]) -> Result<Dataset> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput("appended sample has the wrong dimension".into()));
        }
        let mut v = self.values.clone();
        v.extend_from_slice(x);
        Ok(Dataset { dim: self.dim, values: v })
    }
}

/// A parameter value: continuous coordinates followed by lattice coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ParamPoint {
    pub continuous: Vec<f64>,
    pub discrete: Vec<i64>,
}

impl ParamPoint {
    pub fn continuous(v: Vec<f64>) -> Self {
        ParamPoint { continuous: v, discrete: Vec::new() }
    }

    pub fn discrete(v: Vec<i64>) -> Self {
        ParamPoint { continuous: Vec::new(), discrete: v }
    }

    pub fn empty() -> Self {
        ParamPoint::default()
    }

    pub fn dim(&self) -> usize {
        self.continuous.len() + self.discrete.len()
    }

    /// Compact label used in CSV output, e.g. `5;0.75`.
    pub fn label(&self) -> String {
        let mut parts: Vec<String> = self.continuous.iter().map(|v| format!("{v}")).collect();
        parts.extend(self.discrete.iter().map(|v| v.to_string()));
        if parts.is_empty() {
            "-".into()
        } else {
            parts.join(";")
        }
    }
}

/// How a continuous axis is mapped for quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisScale {
    Linear,
    /// Positive axis integrated in log coordinates.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousDim {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
    pub scale: AxisScale,
}

impl ContinuousDim {
    pub fn real(name: &str) -> Self {
        ContinuousDim {
            name: name.into(),
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lo_open: true,
            hi_open: true,
            scale: AxisScale::Linear,
        }
    }

    pub fn positive(name: &str) -> Self {
        ContinuousDim { name: name.into(), lo: 0.0, hi: f64::INFINITY, lo_open: true, hi_open: true, scale: AxisScale::Log }
    }

    pub fn interval(name: &str, lo: f64, hi: f64) -> Self {
        ContinuousDim { name: name.into(), lo, hi, lo_open: false, hi_open: false, scale: AxisScale::Linear }
    }

    pub fn contains(&self, v: f64) -> bool {
        let lo_ok = if self.lo_open { v > self.lo } else { v >= self.lo };
        let hi_ok = if self.hi_open { v < self.hi } else { v <= self.hi };
        lo_ok && hi_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDim {
    pub name: String,
    /// Lattice spacing Δθ.
    pub spacing: f64,
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl DiscreteDim {
    pub fn contains(&self, v: i64) -> bool {
        self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Constraint {
    /// The listed continuous coordinates are nonnegative and sum to at most one.
    Simplex(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ParamSpace {
    pub continuous: Vec<ContinuousDim>,
    pub discrete: Vec<DiscreteDim>,
    pub constraints: Vec<Constraint>,
}

impl ParamSpace {
    pub fn dim(&self) -> usize {
        self.continuous.len() + self.discrete.len()
    }

    pub fn contains(&self, p: &ParamPoint) -> bool {
        if p.continuous.len() != self.continuous.len() || p.discrete.len() != self.discrete.len() {
            return false;
        }
        let box_ok = self.continuous.iter().zip(&p.continuous).all(|(d, &v)| d.contains(v))
            && self.discrete.iter().zip(&p.discrete).all(|(d, &v)| d.contains(v));
        box_ok
            && self.constraints.iter().all(|c| match c {
                Constraint::Simplex(ix) => {
                    let s: f64 = ix.iter().map(|&i| p.continuous[i]).sum();
                    ix.iter().all(|&i| p.continuous[i] >= 0.0) && s <= 1.0 + 1e-12
                }
            })
    }

    pub fn check(&self, p: &ParamPoint) -> Result<()> {
        if p.continuous.len() != self.continuous.len() || p.discrete.len() != self.discrete.len() {
            return Err(Error::InvalidInput(format!(
                "parameter has {}+{} coordinates, space has {}+{}",
                p.continuous.len(),
                p.discrete.len(),
                self.continuous.len(),
                self.discrete.len()
            )));
        }
        if !self.contains(p) {
            return Err(Error::InvalidInput(format!("parameter {} outside the support", p.label())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_shape_checks() {
        assert!(Dataset::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Dataset::new(1, vec![]).is_err());
        let d = Dataset::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.sample(1), &[3.0, 4.0]);
        assert_eq!(d.without(0).unwrap().values(), &[3.0, 4.0]);
        assert_eq!(d.prefix(1).unwrap().values(), &[1.0, 2.0]);
        assert!(d.with(&[1.0]).is_err());
    }

    #[test]
    fn space_membership() {
        let s = ParamSpace {
            continuous: vec![ContinuousDim::interval("p", 0.0, 1.0), ContinuousDim::positive("k")],
            discrete: vec![],
            constraints: vec![Constraint::Simplex(vec![0])],
        };
        assert!(s.contains(&ParamPoint::continuous(vec![0.5, 2.0])));
        assert!(!s.contains(&ParamPoint::continuous(vec![1.5, 2.0])));
        assert!(!s.contains(&ParamPoint::continuous(vec![0.5, 0.0])));
        assert!(s.check(&ParamPoint::continuous(vec![0.5])).is_err());
    }
}

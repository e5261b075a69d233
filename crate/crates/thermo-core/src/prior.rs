//! Possibly improper prior densities.

use crate::error::{Error, Result};
use crate::space::ParamPoint;
use serde::{Deserialize, Serialize};

/// Log weights tabulated on a grid. Continuous axes are interpolated
/// linearly in log weight; discrete axes are looked up exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPrior {
    pub axes: Vec<Vec<f64>>,
    /// Row-major over `axes`, last axis fastest.
    pub log_w: Vec<f64>,
    pub discrete: bool,
}

impl GridPrior {
    pub fn new(axes: Vec<Vec<f64>>, log_w: Vec<f64>, discrete: bool) -> Result<Self> {
        let n: usize = axes.iter().map(|a| a.len()).product();
        if axes.is_empty() || n != log_w.len() {
            return Err(Error::InvalidInput("grid weights do not match the axes".into()));
        }
        for a in &axes {
            if a.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput("grid axis is not strictly increasing".into()));
            }
        }
        Ok(GridPrior { axes, log_w, discrete })
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.axes.len()];
        for i in (0..self.axes.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.axes[i + 1].len();
        }
        s
    }

    pub fn log_weight(&self, coords: &[f64]) -> f64 {
        if coords.len() != self.axes.len() {
            return f64::NEG_INFINITY;
        }
        let strides = self.strides();
        if self.discrete {
            let mut idx = 0;
            for (k, (&c, axis)) in coords.iter().zip(&self.axes).enumerate() {
                let i = axis.partition_point(|&a| a < c - 1e-9);
                if i < axis.len() && (axis[i] - c).abs() < 1e-9 {
                    idx += i * strides[k];
                } else {
                    return f64::NEG_INFINITY;
                }
            }
            return self.log_w[idx];
        }
        // multilinear interpolation
        let mut base = 0;
        let mut fracs = Vec::with_capacity(coords.len());
        for (k, (&c, axis)) in coords.iter().zip(&self.axes).enumerate() {
            if c < axis[0] || c > axis[axis.len() - 1] {
                return f64::NEG_INFINITY;
            }
            if axis.len() == 1 {
                fracs.push((0, 0.0));
                continue;
            }
            let j = match axis.partition_point(|&a| a <= c) {
                0 => 0,
                j if j >= axis.len() => axis.len() - 2,
                j => j - 1,
            };
            let t = (c - axis[j]) / (axis[j + 1] - axis[j]);
            base += j * strides[k];
            fracs.push((strides[k], t));
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << coords.len()) {
            let mut w = 1.0;
            let mut idx = base;
            for (k, &(stride, t)) in fracs.iter().enumerate() {
                if corner >> k & 1 == 1 {
                    w *= t;
                    idx += stride;
                } else {
                    w *= 1.0 - t;
                }
            }
            if w != 0.0 {
                acc += w * self.log_w[idx];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorShape {
    /// ϖ = 1.
    Flat,
    /// ϖ = Π θᵢ^eᵢ over the continuous coordinates.
    Power(Vec<f64>),
    /// Independent normal densities on the continuous coordinates.
    Normal { mean: Vec<f64>, sd: Vec<f64> },
    /// ϖ = e^{−b·m} on the first lattice coordinate.
    Geometric { rate: f64 },
    Grid(GridPrior),
}

/// A prior density ϖ(θ) = exp(log_c)·shape(θ), optionally truncated to a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub shape: PriorShape,
    pub log_c: f64,
    /// Declared, never inferred.
    pub proper: bool,
    /// Sample size a GPI prior was solved for.
    pub n_tag: Option<f64>,
    /// Truncation box on the continuous coordinates.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Prior {
    pub fn flat() -> Self {
        Prior { shape: PriorShape::Flat, log_c: 0.0, proper: false, n_tag: None, bounds: None }
    }

    pub fn power(exponents: Vec<f64>, log_c: f64) -> Self {
        Prior { shape: PriorShape::Power(exponents), log_c, proper: false, n_tag: None, bounds: None }
    }

    pub fn normal(mean: Vec<f64>, sd: Vec<f64>) -> Self {
        Prior { shape: PriorShape::Normal { mean, sd }, log_c: 0.0, proper: true, n_tag: None, bounds: None }
    }

    pub fn geometric(rate: f64) -> Self {
        Prior { shape: PriorShape::Geometric { rate }, log_c: 0.0, proper: false, n_tag: None, bounds: None }
    }

    pub fn grid(grid: GridPrior) -> Self {
        Prior { shape: PriorShape::Grid(grid), log_c: 0.0, proper: false, n_tag: None, bounds: None }
    }

    pub fn with_log_c(mut self, log_c: f64) -> Self {
        self.log_c = log_c;
        self
    }

    pub fn tagged(mut self, n: f64) -> Self {
        self.n_tag = Some(n);
        self
    }

    /// Power-law shape truncated to `bounds` and normalized there.
    pub fn normalized_power_on_box(exponents: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if exponents.len() != bounds.len() {
            return Err(Error::InvalidInput("one exponent per bounded coordinate".into()));
        }
        let mut log_norm = 0.0;
        for (&e, &(a, b)) in exponents.iter().zip(&bounds) {
            if !(b > a) {
                return Err(Error::InvalidInput(format!("empty interval [{a}, {b}]")));
            }
            let mass = if (e + 1.0).abs() < 1e-14 {
                if a <= 0.0 {
                    return Err(Error::Divergence("1/θ weight on an interval touching zero".into()));
                }
                (b / a).ln()
            } else if e < -1.0 && a <= 0.0 {
                return Err(Error::Divergence("power weight not integrable at zero".into()));
            } else {
                (b.powf(e + 1.0) - a.powf(e + 1.0)) / (e + 1.0)
            };
            log_norm += mass.ln();
        }
        Ok(Prior {
            shape: PriorShape::Power(exponents),
            log_c: -log_norm,
            proper: true,
            n_tag: None,
            bounds: Some(bounds),
        })
    }

    pub fn log_density(&self, p: &ParamPoint) -> f64 {
        if let Some(b) = &self.bounds {
            for (&(lo, hi), &v) in b.iter().zip(&p.continuous) {
                if v < lo || v > hi {
                    return f64::NEG_INFINITY;
                }
            }
        }
        let shape = match &self.shape {
            PriorShape::Flat => 0.0,
            PriorShape::Power(e) => {
                let mut s = 0.0;
                for (&ei, &v) in e.iter().zip(&p.continuous) {
                    if ei != 0.0 {
                        if v <= 0.0 {
                            return f64::NEG_INFINITY;
                        }
                        s += ei * v.ln();
                    }
                }
                s
            }
            PriorShape::Normal { mean, sd } => mean
                .iter()
                .zip(sd)
                .zip(&p.continuous)
                .map(|((&m, &s), &v)| {
                    let z = (v - m) / s;
                    -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
                })
                .sum(),
            PriorShape::Geometric { rate } => match p.discrete.first() {
                Some(&m) => -rate * m as f64,
                None => 0.0,
            },
            PriorShape::Grid(g) => {
                let coords: Vec<f64> = if g.discrete {
                    p.discrete.iter().map(|&v| v as f64).collect()
                } else {
                    p.continuous.clone()
                };
                g.log_weight(&coords)
            }
        };
        self.log_c + shape
    }

    /// Short description used in output headers.
    pub fn describe(&self) -> String {
        let shape = match &self.shape {
            PriorShape::Flat => "flat".to_string(),
            PriorShape::Power(e) => format!("power{e:?}"),
            PriorShape::Normal { mean, sd } => format!("normal(mean={mean:?},sd={sd:?})"),
            PriorShape::Geometric { rate } => format!("geometric(b={rate})"),
            PriorShape::Grid(g) => format!("grid({} points)", g.log_w.len()),
        };
        format!("{shape},log_c={},proper={}", self.log_c, self.proper)
    }
}

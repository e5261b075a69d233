//! Exponential and uniform-support models.

use crate::error::{Error, Result};
use crate::model::{Model, Theta0};
use crate::prior::{Prior, PriorShape};
use crate::quad::gauss_laguerre;
use crate::rng::StreamRng;
use crate::space::{ContinuousDim, Dataset, ParamPoint, ParamSpace};
use crate::special::{gamma_p, gamma_p_inv, gamma_q, ln_gamma};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

fn inverse_shape(prior: &Prior) -> bool {
    prior.bounds.is_none() && matches!(&prior.shape, PriorShape::Power(e) if e.len() == 1 && e[0] == -1.0)
}

/// (exponent, lo, hi) for a power or flat prior truncated to one interval.
fn bounded_power(prior: &Prior) -> Option<(f64, f64, f64)> {
    let &[(a, b)] = prior.bounds.as_deref()? else { return None };
    match &prior.shape {
        PriorShape::Flat => Some((0.0, a, b)),
        PriorShape::Power(e) if e.len() == 1 => Some((e[0], a, b)),
        _ => None,
    }
}

fn open_uniform(rng: &mut StreamRng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// q(x|λ) = λ e^{−λx}.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Exponential;

impl Model for Exponential {
    fn id(&self) -> String {
        "exponential".into()
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn param_space(&self) -> ParamSpace {
        ParamSpace { continuous: vec![ContinuousDim::positive("lambda")], ..Default::default() }
    }
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64 {
        let l = theta.continuous[0];
        if x[0] < 0.0 || l <= 0.0 {
            f64::NEG_INFINITY
        } else {
            l.ln() - l * x[0]
        }
    }
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        let e: f64 = Exp1.sample(rng);
        vec![e / theta.continuous[0]]
    }
    fn entropy(&self, theta: &ParamPoint) -> Option<f64> {
        Some(1.0 - theta.continuous[0].ln())
    }
    fn fisher_closed_form(&self, theta: &ParamPoint) -> Option<Vec<Vec<f64>>> {
        Some(vec![vec![theta.continuous[0].powi(-2)]])
    }
    fn mle(&self, data: &Dataset) -> Option<Result<ParamPoint>> {
        let s: f64 = data.values().iter().sum();
        if s <= 0.0 {
            return Some(Err(Error::NotDefined("exponential MLE needs a positive sum".into())));
        }
        Some(Ok(ParamPoint::continuous(vec![data.len() as f64 / s])))
    }
    fn param_hint(&self, data: &Dataset) -> ParamPoint {
        let s: f64 = data.values().iter().sum();
        ParamPoint::continuous(vec![data.len() as f64 / s.max(1e-300)])
    }
    fn observation_rule(&self, theta0: &ParamPoint) -> Option<Vec<(Vec<f64>, f64)>> {
        let l = theta0.continuous[0];
        Some(gauss_laguerre(40).into_iter().map(|(x, w)| (vec![x / l], w)).collect())
    }
    fn exact_log_evidence(&self, prior: &Prior, data: &Dataset) -> Option<Result<f64>> {
        if data.values().iter().any(|&x| x < 0.0) {
            return Some(Ok(f64::NEG_INFINITY));
        }
        let n = data.len() as f64;
        let s: f64 = data.values().iter().sum();
        if inverse_shape(prior) {
            return Some(Ok(prior.log_c + ln_gamma(n) - n * s.ln()));
        }
        // ∫_a^b λ^{N+e} e^{−λS} dλ through the incomplete gamma function
        let (e, a, b) = bounded_power(prior)?;
        let p = n + e + 1.0;
        if p <= 0.0 || s <= 0.0 {
            return None;
        }
        let (a, b) = (a.max(0.0), b);
        let mass = if a * s > p { gamma_q(p, a * s) - gamma_q(p, b * s) } else { gamma_p(p, b * s) - gamma_p(p, a * s) };
        Some(Ok(prior.log_c + ln_gamma(p) - p * s.ln() + mass.ln()))
    }
    fn coupled_log_evidence(
        &self,
        prior: &Prior,
        theta0: &Theta0,
        sizes: &[usize],
        rng: &mut StreamRng,
    ) -> Option<Result<Vec<f64>>> {
        if !inverse_shape(prior) {
            return None;
        }
        let l0 = match theta0 {
            Theta0::Fixed(t) => t.continuous[0],
            Theta0::FromPrior => return Some(Err(Error::NotSupported("θ0 from an improper prior".into()))),
        };
        if sizes.contains(&0) {
            return Some(Err(Error::InvalidInput("N ≥ 2 is required with an improper prior".into())));
        }
        let u = open_uniform(rng);
        Some(Ok(sizes
            .iter()
            .map(|&size| {
                let n = size as f64;
                // λ0·Σx ~ Gamma(N, 1)
                let y = gamma_p_inv(n, u);
                prior.log_c + ln_gamma(n) - n * y.ln() + n * l0.ln()
            })
            .collect()))
    }
}

/// q(x|L) = 1/L on [0, L].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UniformSupport;

impl Model for UniformSupport {
    fn id(&self) -> String {
        "uniform".into()
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn param_space(&self) -> ParamSpace {
        ParamSpace { continuous: vec![ContinuousDim::positive("L")], ..Default::default() }
    }
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64 {
        let l = theta.continuous[0];
        if x[0] < 0.0 || x[0] > l {
            f64::NEG_INFINITY
        } else {
            -l.ln()
        }
    }
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        let u: f64 = rng.random();
        vec![u * theta.continuous[0]]
    }
    fn is_regular(&self) -> bool {
        false
    }
    fn entropy(&self, theta: &ParamPoint) -> Option<f64> {
        Some(theta.continuous[0].ln())
    }
    fn mle(&self, data: &Dataset) -> Option<Result<ParamPoint>> {
        let m = data.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(Ok(ParamPoint::continuous(vec![m])))
    }
    fn param_hint(&self, data: &Dataset) -> ParamPoint {
        let m = data.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ParamPoint::continuous(vec![m.max(1e-300) * (1.0 + 1.0 / data.len() as f64)])
    }
    fn exact_log_evidence(&self, prior: &Prior, data: &Dataset) -> Option<Result<f64>> {
        if data.values().iter().any(|&x| x < 0.0) {
            return Some(Ok(f64::NEG_INFINITY));
        }
        let n = data.len() as f64;
        let m = data.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !inverse_shape(prior) {
            // ∫_{max(m,a)}^b L^{e−N} dL
            let (e, a, b) = bounded_power(prior)?;
            let lo = m.max(a);
            if lo >= b {
                return Some(Ok(f64::NEG_INFINITY));
            }
            let k = e - n + 1.0;
            if lo <= 0.0 && k <= 0.0 {
                return Some(Err(Error::Divergence("evidence diverges along L→0".into())));
            }
            let r = (b / lo).ln();
            let v = if k == 0.0 {
                r.ln()
            } else if k < 0.0 {
                k * lo.ln() + (-(k * r).exp_m1()).ln() - (-k).ln()
            } else {
                k * b.ln() + (-(-k * r).exp_m1()).ln() - k.ln()
            };
            return Some(Ok(prior.log_c + v));
        }
        if m <= 0.0 {
            return Some(Err(Error::Divergence("evidence diverges along L→0 (all samples zero)".into())));
        }
        Some(Ok(prior.log_c - n * m.ln() - n.ln()))
    }
    fn coupled_log_evidence(
        &self,
        prior: &Prior,
        theta0: &Theta0,
        sizes: &[usize],
        rng: &mut StreamRng,
    ) -> Option<Result<Vec<f64>>> {
        if !inverse_shape(prior) {
            return None;
        }
        let l0 = match theta0 {
            Theta0::Fixed(t) => t.continuous[0],
            Theta0::FromPrior => return Some(Err(Error::NotSupported("θ0 from an improper prior".into()))),
        };
        if sizes.contains(&0) {
            return Some(Err(Error::InvalidInput("N ≥ 2 is required with an improper prior".into())));
        }
        let u = open_uniform(rng);
        Some(Ok(sizes
            .iter()
            .map(|&size| {
                let n = size as f64;
                // max/L0 = u^{1/N}
                let log_max = l0.ln() + u.ln() / n;
                prior.log_c - n * log_max - n.ln()
            })
            .collect()))
    }
}

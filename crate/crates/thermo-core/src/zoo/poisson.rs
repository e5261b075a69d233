//! Photon-counting stoichiometry model: count k ~ Poisson(m·t) for an
//! integer number m ≥ 1 of emitters observed for a time t (unit rate).

use crate::error::{Error, Result};
use crate::model::{Model, StatisticFreeEnergy};
use crate::prior::Prior;
use crate::rng::StreamRng;
use crate::space::{Dataset, DiscreteDim, ParamPoint, ParamSpace};
use crate::special::{ln_gamma, log_sum_exp};
use rand_distr::{Distribution, Poisson};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonZMode {
    DirectSum,
    Resummed,
    Recursion,
    Auto,
}

/// log Poisson pmf.
pub fn log_pmf(k: f64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k * mu.ln() - mu - ln_gamma(k + 1.0)
}

/// log z(k; t) = log Σ_{m≥1} e^{−bm} (mt)^k e^{−mt}/k!.
pub fn poisson_log_z(k: u64, t: f64, b: f64, mode: PoissonZMode) -> f64 {
    let mode = match mode {
        PoissonZMode::Auto if k <= 20 => PoissonZMode::Recursion,
        PoissonZMode::Auto if k as f64 / (t * t) > 0.1 => PoissonZMode::Resummed,
        PoissonZMode::Auto => PoissonZMode::DirectSum,
        m => m,
    };
    match mode {
        PoissonZMode::DirectSum => log_z_direct(k, t, b),
        PoissonZMode::Recursion => log_z_eulerian(k, t, b),
        PoissonZMode::Resummed => log_z_resummed(k, t, b),
        PoissonZMode::Auto => unreachable!(),
    }
}

fn log_z_direct(k: u64, t: f64, b: f64) -> f64 {
    let kf = k as f64;
    let s = b + t;
    let lg = ln_gamma(kf + 1.0);
    let peak = (kf / s).max(1.0);
    let w = 12.0 * (kf + 1.0).sqrt() / s + 60.0 / s + 3.0;
    let lo = ((peak - w).floor() as i64).max(1);
    let hi = (peak + w).ceil() as i64;
    let terms: Vec<f64> = (lo..=hi).map(|m| {
        let mf = m as f64;
        -mf * s + kf * (mf * t).ln() - lg
    }).collect();
    log_sum_exp(&terms)
}

/// Iterating z(k) = −(t/k) ∂_b z(k−1) from z(0) = x/(1−x), x = e^{−(b+t)},
/// keeps z(k) = t^k/k! · x·A_k(x)/(1−x)^{k+1}; the polynomial coefficients
/// obey the Eulerian recurrence and are all positive.
fn log_z_eulerian(k: u64, t: f64, b: f64) -> f64 {
    let s = b + t;
    let kf = k as f64;
    let log_one_minus_x = (-(-s).exp_m1()).ln();
    if k == 0 {
        return -s - log_one_minus_x;
    }
    // log A(n, i), rows built up to n = k
    let mut row = vec![0.0f64]; // A(1,0) = 1
    for n in 2..=k as usize {
        let mut next = vec![f64::NEG_INFINITY; n];
        for i in 0..n {
            let mut acc = f64::NEG_INFINITY;
            if i < n - 1 {
                acc = crate::special::log_add_exp(acc, ((i + 1) as f64).ln() + row[i]);
            }
            if i >= 1 {
                acc = crate::special::log_add_exp(acc, ((n - i) as f64).ln() + row[i - 1]);
            }
            next[i] = acc;
        }
        row = next;
    }
    let terms: Vec<f64> = row.iter().enumerate().map(|(i, &la)| la - (i as f64 + 1.0) * s).collect();
    kf * t.ln() - ln_gamma(kf + 1.0) + log_sum_exp(&terms) - (kf + 1.0) * log_one_minus_x
}

/// Poisson-resummed series Σ_ν (s + 2πiν)^{−(k+1)} with an integral tail.
/// Terms of size 1/s cancel down to z, so once z drops below roughly ε/s
/// no digits survive and the result is NaN.
fn log_z_resummed(k: u64, t: f64, b: f64) -> f64 {
    let s = b + t;
    let kf = k as f64;
    let p = kf + 1.0;
    let mut bracket = 1.0;
    let mut nu = 1.0f64;
    let max_terms = 200_000.0;
    loop {
        let y = 2.0 * PI * nu / s;
        let mag = (1.0 + y * y).powf(-0.5 * p);
        bracket += 2.0 * mag * (p * y.atan()).cos();
        if mag < 1e-18 || nu >= max_terms {
            break;
        }
        nu += 1.0;
    }
    // Σ_{ν>M} ≈ ∫_{M+½}^∞
    let a = nu + 0.5;
    let phi = (2.0 * PI * a / s).atan();
    let tail = if k == 0 {
        (s / PI) * (0.5 * PI - phi)
    } else {
        -(s / (PI * kf)) * phi.cos().powf(kf) * (kf * phi).sin()
    };
    bracket += tail;
    if k == 0 {
        (bracket / s - 0.5).ln()
    } else {
        kf * t.ln() - p * s.ln() + bracket.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonStoich {
    /// Exposure time (λt with unit rate).
    pub t: f64,
    /// Geometric prior rate b in e^{−bm}.
    pub b: f64,
}

impl PoissonStoich {
    pub fn natural_prior(&self) -> Prior {
        Prior::geometric(self.b)
    }

    fn log_prior(prior: &Prior, m: i64) -> f64 {
        prior.log_density(&ParamPoint::discrete(vec![m]))
    }

    /// Posterior probability of `m` given a count `k` at time t.
    pub fn posterior(&self, prior: &Prior, k: u64, m: i64) -> f64 {
        let kf = k as f64;
        let lz = self.log_z_prior(prior, k, self.t);
        (Self::log_prior(prior, m) + log_pmf(kf, m as f64 * self.t) - lz).exp()
    }

    /// log Σ_m ϖ(m) P(k; m t) for an arbitrary lattice prior.
    pub fn log_z_prior(&self, prior: &Prior, k: u64, t: f64) -> f64 {
        let kf = k as f64;
        let centre = kf / t;
        let w = 10.0 * (kf + 1.0).sqrt() / t + 40.0 / t + 2.0;
        let lo = ((centre - w).floor() as i64).max(1);
        let hi = (centre + w).ceil() as i64;
        let lg = ln_gamma(kf + 1.0);
        let terms: Vec<f64> = (lo..=hi.max(lo))
            .map(|m| Self::log_prior(prior, m) + kf * (m as f64 * t).ln() - m as f64 * t - lg)
            .collect();
        log_sum_exp(&terms)
    }

    fn m_window(k: u64, t: f64) -> (i64, i64) {
        let kf = k as f64;
        let centre = kf / t;
        let w = 10.0 * (kf + 1.0).sqrt() / t + 40.0 / t + 2.0;
        let lo = ((centre - w).floor() as i64).max(1);
        (lo, ((centre + w).ceil() as i64).max(lo))
    }

    /// Ḡ(t) − t·H0 = −H_t − E log z for true m0.
    pub fn excess_free_energy(&self, prior: &Prior, m0: i64, t: f64) -> f64 {
        let mu = m0 as f64 * t;
        let lo = (mu - 12.0 * mu.sqrt() - 20.0).max(0.0).floor() as u64;
        let hi = (mu + 12.0 * mu.sqrt() + 20.0).ceil() as u64;
        // prior and log m tabulated once over every window
        let m_lo = Self::m_window(lo, t).0;
        let m_hi = Self::m_window(hi, t).1;
        let lp: Vec<f64> = (m_lo..=m_hi).map(|m| Self::log_prior(prior, m)).collect();
        let lm: Vec<f64> = (m_lo..=m_hi).map(|m| (m as f64).ln()).collect();
        let lt = t.ln();
        let mut acc = 0.0;
        for k in lo..=hi {
            let kf = k as f64;
            let lpk = log_pmf(kf, mu);
            let p = lpk.exp();
            if p == 0.0 {
                continue;
            }
            let (a, b) = Self::m_window(k, t);
            let (a, b) = ((a - m_lo) as usize, (b - m_lo) as usize);
            let term = |i: usize| lp[i] + kf * lm[i] - (m_lo + i as i64) as f64 * t;
            let peak = (a..=b).map(term).fold(f64::NEG_INFINITY, f64::max);
            let log_z = if peak == f64::NEG_INFINITY {
                peak
            } else {
                let s: f64 = (a..=b).map(|i| (term(i) - peak).exp()).sum();
                peak + s.ln() + kf * lt - ln_gamma(kf + 1.0)
            };
            // −H_t − Σ P log z = Σ P (log P − log z)
            acc += p * (lpk - log_z);
        }
        acc
    }
}

impl Model for PoissonStoich {
    fn id(&self) -> String {
        format!("poisson:t={},b={}", self.t, self.b)
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn param_space(&self) -> ParamSpace {
        ParamSpace {
            discrete: vec![DiscreteDim { name: "m".into(), spacing: 1.0, lo: Some(1), hi: None }],
            ..Default::default()
        }
    }
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64 {
        let m = theta.discrete[0];
        if m < 1 || x[0] < 0.0 || x[0].fract() != 0.0 {
            return f64::NEG_INFINITY;
        }
        log_pmf(x[0], m as f64 * self.t)
    }
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        let mu = theta.discrete[0] as f64 * self.t;
        match Poisson::new(mu) {
            Ok(p) => vec![p.sample(rng)],
            Err(_) => vec![0.0],
        }
    }
    fn fisher_closed_form(&self, theta: &ParamPoint) -> Option<Vec<Vec<f64>>> {
        // continuum limit in m for one exposure of length t
        Some(vec![vec![self.t / theta.discrete[0] as f64]])
    }
    fn param_hint(&self, data: &Dataset) -> ParamPoint {
        let k: f64 = data.values().iter().sum::<f64>() / data.len() as f64;
        ParamPoint::discrete(vec![((k / self.t).round() as i64).max(1)])
    }
    fn continuous_size(&self) -> bool {
        true
    }
    fn statistic_free_energy(&self, prior: &Prior, theta0: &ParamPoint, n: f64) -> Option<Result<StatisticFreeEnergy>> {
        if !prior.bounds.is_none() {
            return None;
        }
        let m0 = match theta0.discrete.first() {
            Some(&m) if m >= 1 => m,
            _ => return Some(Err(Error::InvalidInput("θ0 must be an emitter count m ≥ 1".into()))),
        };
        Some(Ok(StatisticFreeEnergy { excess: self.excess_free_energy(prior, m0, n), h0: None }))
    }
}

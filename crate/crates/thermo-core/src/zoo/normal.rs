//! Normal models: fixed, conjugate, flat-mean, mean+variance and lattice mean.

use super::theta;
use crate::error::{Error, Result};
use crate::model::{EvidenceEstimate, EvidenceMethod, Model, StatisticFreeEnergy, Theta0};
use crate::prior::{Prior, PriorShape};
use crate::rng::StreamRng;
use crate::space::{ContinuousDim, Dataset, DiscreteDim, ParamPoint, ParamSpace};
use crate::quad::{log_integrate, QuadOptions};
use crate::special::{gamma_p_inv, ln_gamma, log_normal_interval};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn normal_ll(x: &[f64], mu: &[f64], sigma: f64) -> f64 {
    let d = x.len() as f64;
    let q: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * d * (LN_2PI + 2.0 * sigma.ln()) - 0.5 * q / (sigma * sigma)
}

fn normal_draw(mu: &[f64], sigma: f64, rng: &mut StreamRng) -> Vec<f64> {
    mu.iter()
        .map(|&m| {
            let z: f64 = StandardNormal.sample(rng);
            m + sigma * z
        })
        .collect()
}

/// Per-axis sample means and the pooled sum of squared deviations.
fn mean_and_ss(data: &Dataset) -> (Vec<f64>, f64) {
    let d = data.dim();
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for x in data.iter() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let ss = data.iter().map(|x| x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum();
    (mean, ss)
}

/// A uniform draw strictly inside (0, 1).
fn open_uniform(rng: &mut StreamRng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draw of a chi-squared variable with `dof` degrees of freedom at quantile `u`.
fn chi2_at(dof: f64, u: f64) -> f64 {
    if dof <= 0.0 {
        0.0
    } else {
        2.0 * gamma_p_inv(0.5 * dof, u)
    }
}

fn is_plain(prior: &Prior, shape: impl Fn(&PriorShape) -> bool) -> bool {
    prior.bounds.is_none() && shape(&prior.shape)
}

/// Parameter-free normal 𝒩(μ0, σ0) in D dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFixed {
    pub mu: Vec<f64>,
    pub sigma: f64,
}

impl Model for NormalFixed {
    fn id(&self) -> String {
        format!("normal-fixed:D={},mu={},sigma={}", self.mu.len(), self.mu[0], self.sigma)
    }
    fn obs_dim(&self) -> usize {
        self.mu.len()
    }
    fn param_space(&self) -> ParamSpace {
        ParamSpace::default()
    }
    fn log_likelihood(&self, x: &[f64], _theta: &ParamPoint) -> f64 {
        normal_ll(x, &self.mu, self.sigma)
    }
    fn sample(&self, _theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        normal_draw(&self.mu, self.sigma, rng)
    }
    fn entropy(&self, _theta: &ParamPoint) -> Option<f64> {
        Some(0.5 * self.mu.len() as f64 * (LN_2PI + 1.0 + 2.0 * self.sigma.ln()))
    }
    fn mle(&self, _data: &Dataset) -> Option<Result<ParamPoint>> {
        Some(Ok(ParamPoint::empty()))
    }
    fn exact_log_evidence(&self, prior: &Prior, data: &Dataset) -> Option<Result<f64>> {
        Some(Ok(prior.log_c + data.iter().map(|x| normal_ll(x, &self.mu, self.sigma)).sum::<f64>()))
    }
}

/// Normal with known σ and a normal prior on the K-dimensional mean.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalConjugate {
    pub k: usize,
    pub sigma: f64,
    pub mu_p: f64,
    pub sigma_p: f64,
}

impl NormalConjugate {
    pub fn natural_prior(&self) -> Prior {
        Prior::normal(vec![self.mu_p; self.k], vec![self.sigma_p; self.k])
    }

    /// N0 = σ²/σϖ².
    pub fn n0(&self) -> f64 {
        (self.sigma / self.sigma_p).powi(2)
    }

    /// (μϖ, N0) per axis when `prior` is an untruncated normal.
    fn conj(&self, prior: &Prior) -> Option<Vec<(f64, f64)>> {
        match (&prior.shape, &prior.bounds) {
            (PriorShape::Normal { mean, sd }, None) if mean.len() == self.k && sd.len() == self.k => {
                Some(mean.iter().zip(sd).map(|(&m, &s)| (m, (self.sigma / s).powi(2))).collect())
            }
            _ => None,
        }
    }
}

impl Model for NormalConjugate {
    fn id(&self) -> String {
        format!("normal-conj:K={},sigma={},mu_p={},sigma_p={}", self.k, self.sigma, self.mu_p, self.sigma_p)
    }
    fn obs_dim(&self) -> usize {
        self.k
    }
    fn param_space(&self) -> ParamSpace {
        ParamSpace {
            continuous: (0..self.k).map(|i| ContinuousDim::real(&format!("mu{i}"))).collect(),
            ..Default::default()
        }
    }
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64 {
        normal_ll(x, &theta.continuous, self.sigma)
    }
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        normal_draw(&theta.continuous, self.sigma, rng)
    }
    fn entropy(&self, _theta: &ParamPoint) -> Option<f64> {
        Some(0.5 * self.k as f64 * (LN_2PI + 1.0 + 2.0 * self.sigma.ln()))
    }
    fn fisher_closed_form(&self, _theta: &ParamPoint) -> Option<Vec<Vec<f64>>> {
        let s2 = self.sigma * self.sigma;
        Some((0..self.k).map(|i| (0..self.k).map(|j| if i == j { 1.0 / s2 } else { 0.0 }).collect()).collect())
    }
    fn mle(&self, data: &Dataset) -> Option<Result<ParamPoint>> {
        Some(Ok(ParamPoint::continuous(mean_and_ss(data).0)))
    }
    fn param_hint(&self, data: &Dataset) -> ParamPoint {
        ParamPoint::continuous(mean_and_ss(data).0)
    }
    fn observation_rule(&self, theta0: &ParamPoint) -> Option<Vec<(Vec<f64>, f64)>> {
        if self.k != 1 {
            return None;
        }
        Some(hermite_rule(theta0.continuous[0], self.sigma))
    }
    fn exact_log_evidence(&self, prior: &Prior, data: &Dataset) -> Option<Result<f64>> {
        let conj = self.conj(prior)?;
        let n = data.len() as f64;
        let (mean, _) = mean_and_ss(data);
        let s2 = self.sigma * self.sigma;
        let mut lz = prior.log_c - 0.5 * n * self.k as f64 * (LN_2PI + s2.ln());
        for (j, &(mp, n0)) in conj.iter().enumerate() {
            let ss: f64 = data.iter().map(|x| (x[j] - mean[j]).powi(2)).sum();
            lz -= 0.5 * ((n + n0) / n0).ln();
            lz -= 0.5 * (ss + n * n0 / (n + n0) * (mean[j] - mp).powi(2)) / s2;
        }
        Some(Ok(lz))
    }
    fn coupled_log_evidence(
        &self,
        prior: &Prior,
        theta0: &Theta0,
        sizes: &[usize],
        rng: &mut StreamRng,
    ) -> Option<Result<Vec<f64>>> {
        let conj = self.conj(prior)?;
        let u = open_uniform(rng);
        let z: Vec<f64> = (0..self.k).map(|_| StandardNormal.sample(rng)).collect();
        let delta: Vec<f64> = match theta0 {
            Theta0::Fixed(t) => {
                if t.continuous.len() != self.k {
                    return Some(Err(Error::InvalidInput("θ0 has the wrong dimension".into())));
                }
                t.continuous.iter().zip(&conj).map(|(&m, &(mp, _))| (m - mp) / self.sigma).collect()
            }
            Theta0::FromPrior => conj
                .iter()
                .map(|&(_, n0)| {
                    let w: f64 = StandardNormal.sample(rng);
                    w / n0.sqrt()
                })
                .collect(),
        };
        let kf = self.k as f64;
        let ln_s2 = 2.0 * self.sigma.ln();
        let out = sizes
            .iter()
            .map(|&size| {
                if size == 0 {
                    return prior.log_c;
                }
                let n = size as f64;
                let mut lz = prior.log_c - 0.5 * n * kf * (LN_2PI + ln_s2) - 0.5 * chi2_at(kf * (n - 1.0), u);
                for ((&zj, &dj), &(_, n0)) in z.iter().zip(&delta).zip(&conj) {
                    lz -= 0.5 * ((n + n0) / n0).ln();
                    lz -= 0.5 * n * n0 / (n + n0) * (zj / n.sqrt() + dj).powi(2);
                }
                lz
            })
            .collect();
        Some(Ok(out))
    }
}

/// Gauss–Hermite style rule for expectations over N(μ, σ²) (probabilists' nodes).
pub fn hermite_rule(mu: f64, sigma: f64) -> Vec<(Vec<f64>, f64)> {
    // trapezoid on a wide uniform grid is spectrally accurate for Gaussians
    let m = 161;
    let h = 16.0 / (m - 1) as f64;
    let norm = h / (2.0 * PI).sqrt();
    (0..m)
        .map(|i| {
            let z = -8.0 + h * i as f64;
            (vec![mu + sigma * z], norm * (-0.5 * z * z).exp())
        })
        .collect()
}

/// Normal with known σ and the translation-invariant (flat) prior on the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMeanFlat {
    pub d: usize,
    pub sigma: f64,
}

impl Model for NormalMeanFlat {
    fn id(&self) -> String {
        format!("normal-mean:D={},sigma={}", self.d, self.sigma)
    }
    fn obs_dim(&self) -> usize {
        self.d
    }
    fn param_space(&self) -> ParamSpace {
        ParamSpace {
            continuous: (0..self.d).map(|i| ContinuousDim::real(&format!("mu{i}"))).collect(),
            ..Default::default()
        }
    }
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64 {
        normal_ll(x, &theta.continuous, self.sigma)
    }
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        normal_draw(&theta.continuous, self.sigma, rng)
    }
    fn entropy(&self, _theta: &ParamPoint) -> Option<f64> {
        Some(0.5 * self.d as f64 * (LN_2PI + 1.0 + 2.0 * self.sigma.ln()))
    }
    fn fisher_closed_form(&self, _theta: &ParamPoint) -> Option<Vec<Vec<f64>>> {
        let s2 = self.sigma * self.sigma;
        Some((0..self.d).map(|i| (0..self.d).map(|j| if i == j { 1.0 / s2 } else { 0.0 }).collect()).collect())
    }
    fn mle(&self, data: &Dataset) -> Option<Result<ParamPoint>> {
        Some(Ok(ParamPoint::continuous(mean_and_ss(data).0)))
    }
    fn param_hint(&self, data: &Dataset) -> ParamPoint {
        ParamPoint::continuous(mean_and_ss(data).0)
    }
    fn observation_rule(&self, theta0: &ParamPoint) -> Option<Vec<(Vec<f64>, f64)>> {
        (self.d == 1).then(|| hermite_rule(theta0.continuous[0], self.sigma))
    }
    fn exact_log_evidence(&self, prior: &Prior, data: &Dataset) -> Option<Result<f64>> {
        if !is_plain(prior, |s| matches!(s, PriorShape::Flat)) {
            return None;
        }
        let n = data.len() as f64;
        let (_, ss) = mean_and_ss(data);
        let s2 = self.sigma * self.sigma;
        let d = self.d as f64;
        Some(Ok(prior.log_c - 0.5 * d * n * (LN_2PI + s2.ln()) - 0.5 * ss / s2 + 0.5 * d * (2.0 * PI * s2 / n).ln()))
    }
    fn coupled_log_evidence(
        &self,
        prior: &Prior,
        _theta0: &Theta0,
        sizes: &[usize],
        rng: &mut StreamRng,
    ) -> Option<Result<Vec<f64>>> {
        if !is_plain(prior, |s| matches!(s, PriorShape::Flat)) {
            return None;
        }
        if sizes.contains(&0) {
            return Some(Err(Error::InvalidInput("N ≥ 2 is required with an improper prior".into())));
        }
        let u = open_uniform(rng);
        let s2 = self.sigma * self.sigma;
        let d = self.d as f64;
        Some(Ok(sizes
            .iter()
            .map(|&size| {
                let n = size as f64;
                prior.log_c - 0.5 * d * n * (LN_2PI + s2.ln()) + 0.5 * d * (2.0 * PI * s2 / n).ln()
                    - 0.5 * chi2_at(d * (n - 1.0), u)
            })
            .collect()))
    }
}

/// Normal with unknown mean (D axes) and a shared unknown σ.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMeanVar {
    pub d: usize,
}

impl NormalMeanVar {
    /// The symmetry-fixed shape σ^{−D−1}.
    pub fn shape_exponents(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.d];
        e.push(-(self.d as f64) - 1.0);
        e
    }

    /// log Z for the σ^{−D−1} shape (without log c) given N and the pooled SS.
    pub fn log_z_shape(&self, n: f64, ss: f64) -> Result<f64> {
        let d = self.d as f64;
        if d * (n - 1.0) <= 0.0 || ss <= 0.0 {
            return Err(Error::Divergence(format!(
                "evidence diverges along σ→0 at N={n} (zero sum of squares)"
            )));
        }
        Ok(-0.5 * d * (n - 1.0) * LN_2PI - 0.5 * d * n.ln() - std::f64::consts::LN_2 + ln_gamma(0.5 * d * n)
            - 0.5 * d * n * (0.5 * ss).ln())
    }

    fn shape_ok(&self, prior: &Prior) -> bool {
        let want = self.shape_exponents();
        is_plain(prior, |s| matches!(s, PriorShape::Power(e) if *e == want))
    }
}

impl Model for NormalMeanVar {
    fn id(&self) -> String {
        format!("normal-meanvar:D={}", self.d)
    }
    fn obs_dim(&self) -> usize {
        self.d
    }
    fn param_space(&self) -> ParamSpace {
        let mut c: Vec<ContinuousDim> = (0..self.d).map(|i| ContinuousDim::real(&format!("mu{i}"))).collect();
        c.push(ContinuousDim::positive("sigma"));
        ParamSpace { continuous: c, ..Default::default() }
    }
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64 {
        let sigma = theta.continuous[self.d];
        if sigma <= 0.0 {
            return f64::NEG_INFINITY;
        }
        normal_ll(x, &theta.continuous[..self.d], sigma)
    }
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        normal_draw(&theta.continuous[..self.d], theta.continuous[self.d], rng)
    }
    fn entropy(&self, theta: &ParamPoint) -> Option<f64> {
        Some(0.5 * self.d as f64 * (LN_2PI + 1.0 + 2.0 * theta.continuous[self.d].ln()))
    }
    fn fisher_closed_form(&self, theta: &ParamPoint) -> Option<Vec<Vec<f64>>> {
        let s2 = theta.continuous[self.d].powi(2);
        let k = self.d + 1;
        Some(
            (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| match (i == j, i == self.d) {
                            (false, _) => 0.0,
                            (true, false) => 1.0 / s2,
                            (true, true) => 2.0 * self.d as f64 / s2,
                        })
                        .collect()
                })
                .collect(),
        )
    }
    fn mle(&self, data: &Dataset) -> Option<Result<ParamPoint>> {
        let (mut mean, ss) = mean_and_ss(data);
        let s = (ss / (data.len() * self.d) as f64).sqrt();
        if s <= 0.0 {
            return Some(Err(Error::NotDefined("zero sample variance".into())));
        }
        mean.push(s);
        Some(Ok(ParamPoint::continuous(mean)))
    }
    fn param_hint(&self, data: &Dataset) -> ParamPoint {
        let (mut mean, ss) = mean_and_ss(data);
        mean.push((ss / (data.len() * self.d) as f64).sqrt().max(1e-3));
        ParamPoint::continuous(mean)
    }
    fn exact_log_evidence(&self, prior: &Prior, data: &Dataset) -> Option<Result<f64>> {
        if !self.shape_ok(prior) {
            return None;
        }
        let (_, ss) = mean_and_ss(data);
        Some(self.log_z_shape(data.len() as f64, ss).map(|v| v + prior.log_c))
    }
    fn custom_log_evidence(&self, prior: &Prior, data: &Dataset) -> Option<Result<EvidenceEstimate>> {
        // power prior flat in μ on a box: the mean integrals are normal
        // probabilities, leaving one quadrature over log σ
        let bounds = prior.bounds.as_ref()?;
        let es = match &prior.shape {
            PriorShape::Power(e) if e.len() == self.d + 1 && e[..self.d].iter().all(|&v| v == 0.0) => e[self.d],
            PriorShape::Flat => 0.0,
            _ => return None,
        };
        if bounds.len() != self.d + 1 {
            return None;
        }
        let (mean, ss) = mean_and_ss(data);
        let n = data.len() as f64;
        let d = self.d as f64;
        let (s_lo, s_hi) = bounds[self.d];
        let lo = if s_lo > 0.0 { s_lo.ln() } else { f64::NEG_INFINITY };
        let mut f = |u: f64| -> f64 {
            let sigma = u.exp();
            let sn = sigma / n.sqrt();
            let mut v = u + es * u - 0.5 * n * d * (LN_2PI + 2.0 * u) - 0.5 * ss / (sigma * sigma);
            for (i, &(a, b)) in bounds[..self.d].iter().enumerate() {
                v += 0.5 * LN_2PI + sn.ln() + log_normal_interval((a - mean[i]) / sn, (b - mean[i]) / sn);
            }
            v
        };
        let hint = (ss / (n * d)).sqrt().max(1e-3).ln().clamp(lo.max(-700.0), s_hi.ln());
        Some(
            log_integrate(&mut f, lo, s_hi.ln(), hint, 0.25, &QuadOptions::default()).map(|r| EvidenceEstimate {
                log_z: prior.log_c + r.log_value,
                method: EvidenceMethod::Quadrature,
                error_bound: r.rel_err.max(1e-15),
            }),
        )
    }
    fn coupled_log_evidence(
        &self,
        prior: &Prior,
        theta0: &Theta0,
        sizes: &[usize],
        rng: &mut StreamRng,
    ) -> Option<Result<Vec<f64>>> {
        if !self.shape_ok(prior) {
            return None;
        }
        let sigma0 = match theta0 {
            Theta0::Fixed(t) => t.continuous[self.d],
            Theta0::FromPrior => return Some(Err(Error::NotSupported("θ0 from an improper prior".into()))),
        };
        let u = open_uniform(rng);
        let d = self.d as f64;
        Some(
            sizes
                .iter()
                .map(|&size| {
                    let n = size as f64;
                    let ss = sigma0 * sigma0 * chi2_at(d * (n - 1.0), u);
                    self.log_z_shape(n, ss).map(|v| v + prior.log_c)
                })
                .collect(),
        )
    }
}

/// Normal with known σ whose mean is restricted to the integers.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalDiscreteMean {
    pub d: usize,
    pub sigma: f64,
    /// Treat N as a real variable (derivatives in N rather than differences).
    pub continuous: bool,
}

impl Model for NormalDiscreteMean {
    fn id(&self) -> String {
        format!("normal-discrete:D={},sigma={}", self.d, self.sigma)
    }
    fn obs_dim(&self) -> usize {
        self.d
    }
    fn param_space(&self) -> ParamSpace {
        ParamSpace {
            discrete: (0..self.d)
                .map(|i| DiscreteDim { name: format!("mu{i}"), spacing: 1.0, lo: None, hi: None })
                .collect(),
            ..Default::default()
        }
    }
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64 {
        let mu: Vec<f64> = theta.discrete.iter().map(|&m| m as f64).collect();
        normal_ll(x, &mu, self.sigma)
    }
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        let mu: Vec<f64> = theta.discrete.iter().map(|&m| m as f64).collect();
        normal_draw(&mu, self.sigma, rng)
    }
    fn entropy(&self, _theta: &ParamPoint) -> Option<f64> {
        Some(0.5 * self.d as f64 * (LN_2PI + 1.0 + 2.0 * self.sigma.ln()))
    }
    fn fisher_closed_form(&self, _theta: &ParamPoint) -> Option<Vec<Vec<f64>>> {
        // continuum limit of the lattice
        let s2 = self.sigma * self.sigma;
        Some((0..self.d).map(|i| (0..self.d).map(|j| if i == j { 1.0 / s2 } else { 0.0 }).collect()).collect())
    }
    fn param_hint(&self, data: &Dataset) -> ParamPoint {
        ParamPoint::discrete(mean_and_ss(data).0.iter().map(|m| m.round() as i64).collect())
    }
    fn continuous_size(&self) -> bool {
        self.continuous
    }
    fn statistic_free_energy(&self, prior: &Prior, theta0: &ParamPoint, n: f64) -> Option<Result<StatisticFreeEnergy>> {
        if !is_plain(prior, |s| matches!(s, PriorShape::Flat)) {
            return None;
        }
        if theta0.discrete.len() != self.d {
            return Some(Err(Error::InvalidInput("θ0 must be a lattice point".into())));
        }
        let prec = n / (self.sigma * self.sigma);
        Some(Ok(StatisticFreeEnergy {
            excess: self.d as f64 * theta::excess_per_dim(prec) - prior.log_c,
            h0: self.entropy(theta0),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn conjugate_single_point_at_prior_mean() {
        let m = NormalConjugate { k: 1, sigma: 1.0, mu_p: 0.0, sigma_p: 1.0 };
        let d = Dataset::scalar(vec![0.0]).unwrap();
        let lz = m.exact_log_evidence(&m.natural_prior(), &d).unwrap().unwrap();
        assert!((lz - (-0.5 * (2.0 * PI).ln() - 0.5 * 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn meanvar_single_sample_diverges() {
        let m = NormalMeanVar { d: 1 };
        let p = Prior::power(m.shape_exponents(), 0.0);
        let d = Dataset::scalar(vec![0.3]).unwrap();
        assert!(matches!(m.exact_log_evidence(&p, &d), Some(Err(Error::Divergence(_)))));
    }

    #[test]
    fn coupled_draws_are_reproducible() {
        let m = NormalMeanFlat { d: 2, sigma: 1.5 };
        let a = m.coupled_log_evidence(&Prior::flat(), &Theta0::FromPrior, &[3, 4], &mut stream(9, 1, 0));
        let b = m.coupled_log_evidence(&Prior::flat(), &Theta0::FromPrior, &[3, 4], &mut stream(9, 1, 0));
        assert_eq!(a.unwrap().unwrap(), b.unwrap().unwrap());
    }
}

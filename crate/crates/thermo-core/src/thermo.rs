//! Disorder-averaged free energy, energy, learning capacity and entropy.

use crate::error::{Error, Result};
use crate::evidence::{log_evidence_auto, predictive_cross_entropies};
use crate::model::{Model, Theta0};
use crate::prior::{Prior, PriorShape};
use crate::rng::{stream, StreamRng};
use crate::space::{Dataset, ParamPoint};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How Ḡ(N−1), Ḡ(N), Ḡ(N+1) are obtained for each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum Route {
    /// Pick the cheapest route the model supports.
    #[default]
    Auto,
    /// Deterministic sufficient-statistic computation (no sampling).
    Statistic,
    /// Exact draws of log Z, coupled across sizes.
    ExactSampler,
    /// One dataset of size N; neighbours from predictive cross entropies.
    PredictiveLoo,
    /// One dataset of size N+1 and its prefixes.
    Prefix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoOptions {
    pub replicates: usize,
    pub seed: u64,
    pub route: Route,
    /// Abort when more than this fraction of replicates diverge.
    pub max_divergent_fraction: f64,
}

impl Default for ThermoOptions {
    fn default() -> Self {
        ThermoOptions { replicates: 1000, seed: 1, route: Route::Auto, max_divergent_fraction: 0.01 }
    }
}

/// One row of a thermodynamic sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    pub model: String,
    pub theta0: String,
    #[serde(rename = "N")]
    pub n: f64,
    pub replicates: usize,
    pub seed: u64,
    pub fbar: f64,
    pub fse: f64,
    pub ubar: f64,
    pub use_: f64,
    pub cbar: f64,
    pub cse: f64,
    pub sbar: f64,
    pub sse: f64,
    /// Mean Ḡ at N−1, N, N+1 (for a continuous size: g, g′, g″ at N).
    pub g: [f64; 3],
    pub route: Route,
    pub divergent: usize,
}

impl ThermoReport {
    pub const CSV_HEADER: [&'static str; 13] =
        ["model", "theta0", "N", "replicates", "seed", "Fbar", "Fse", "Ubar", "Use", "Cbar", "Cse", "Sbar", "Sse"];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.model.clone(),
            self.theta0.clone(),
            format!("{}", self.n),
            self.replicates.to_string(),
            self.seed.to_string(),
            format!("{}", self.fbar),
            format!("{}", self.fse),
            format!("{}", self.ubar),
            format!("{}", self.use_),
            format!("{}", self.cbar),
            format!("{}", self.cse),
            format!("{}", self.sbar),
            format!("{}", self.sse),
        ]
    }
}

/// (F, U, C, S) from a Ḡ triple at integer size n.
pub fn quantities_from_triple(n: f64, g: [f64; 3]) -> [f64; 4] {
    let [gm, g0, gp] = g;
    [g0 / n, gp - g0, -n * n * (gp - 2.0 * g0 + gm), n * gp - (n + 1.0) * g0]
}

/// (F, U, C, S) from g, g′, g″ at a continuous size t.
pub fn quantities_from_derivatives(t: f64, g: [f64; 3]) -> [f64; 4] {
    let [g0, g1, g2] = g;
    [g0 / t, g1, -t * t * g2, t * g1 - g0]
}

/// g, g′, g″ by five-point central differences.
pub fn derivatives(f: &mut dyn FnMut(f64) -> Result<f64>, t: f64) -> Result<[f64; 3]> {
    let h = 0.01 * t;
    let fm2 = f(t - 2.0 * h)?;
    let fm1 = f(t - h)?;
    let f0 = f(t)?;
    let fp1 = f(t + h)?;
    let fp2 = f(t + 2.0 * h)?;
    let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    Ok([f0, d1, d2])
}

/// Draw θ from a proper prior with a closed-form sampler.
pub fn sample_prior(prior: &Prior, rng: &mut StreamRng) -> Result<ParamPoint> {
    if !prior.proper {
        return Err(Error::NotSupported("θ0 cannot be drawn from an improper prior".into()));
    }
    match (&prior.shape, &prior.bounds) {
        (PriorShape::Normal { mean, sd }, _) => Ok(ParamPoint::continuous(
            mean.iter()
                .zip(sd)
                .map(|(&m, &s)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s * z
                })
                .collect(),
        )),
        (PriorShape::Power(e), Some(b)) => Ok(ParamPoint::continuous(
            e.iter()
                .zip(b)
                .map(|(&e, &(lo, hi))| {
                    let u: f64 = rng.random();
                    if (e + 1.0).abs() < 1e-14 {
                        lo * (hi / lo).powf(u)
                    } else {
                        let a = lo.powf(e + 1.0);
                        (a + u * (hi.powf(e + 1.0) - a)).powf(1.0 / (e + 1.0))
                    }
                })
                .collect(),
        )),
        (PriorShape::Flat, Some(b)) => Ok(ParamPoint::continuous(
            b.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect(),
        )),
        _ => Err(Error::NotSupported("no sampler for this prior shape".into())),
    }
}

/// Draw a dataset of size n from q(·|θ).
pub fn simulate(model: &dyn Model, theta: &ParamPoint, n: usize, rng: &mut StreamRng) -> Result<Dataset> {
    let mut v = Vec::with_capacity(n * model.obs_dim());
    for _ in 0..n {
        v.extend(model.sample(theta, rng));
    }
    Dataset::new(model.obs_dim(), v)
}

fn resolve_route(model: &dyn Model, prior: &Prior, theta0: &Theta0, n: f64, requested: Route) -> Route {
    if requested != Route::Auto {
        return requested;
    }
    if let Theta0::Fixed(t) = theta0 {
        if model.statistic_free_energy(prior, t, n.max(1.0)).is_some() {
            return Route::Statistic;
        }
    }
    if n.fract() == 0.0 && n >= 1.0 {
        let mut probe = stream(0, 0, 0);
        let sizes = [n as usize];
        if model.coupled_log_evidence(prior, theta0, &sizes, &mut probe).is_some() {
            return Route::ExactSampler;
        }
    }
    if let Theta0::Fixed(t) = theta0 {
        if model.observation_rule(t).is_some() {
            return Route::PredictiveLoo;
        }
    }
    Route::Prefix
}

fn empty_log_z(prior: &Prior) -> Result<f64> {
    if prior.proper {
        Ok(0.0)
    } else {
        Err(Error::InvalidInput("N ≥ 2 is required with an improper prior".into()))
    }
}

/// Ḡ triple for one replicate; `None` flags a divergent replicate.
fn replicate_triple(
    model: &dyn Model,
    prior: &Prior,
    theta0: &Theta0,
    n: usize,
    route: Route,
    seed: u64,
    r: usize,
) -> Result<Option<[f64; 3]>> {
    let mut rng = stream(seed, r as u64, 0);
    let divergent = |e: &Error| matches!(e, Error::Divergence(_));
    match route {
        Route::ExactSampler => {
            let sizes: Vec<usize> = if n >= 2 { vec![n - 1, n, n + 1] } else { vec![n, n + 1] };
            let out = match model.coupled_log_evidence(prior, theta0, &sizes, &mut rng) {
                Some(Ok(v)) => v,
                Some(Err(e)) if divergent(&e) => return Ok(None),
                Some(Err(e)) => return Err(e),
                None => return Err(Error::NotSupported(format!("{} has no exact evidence sampler", model.id()))),
            };
            let lz = if n >= 2 { [out[0], out[1], out[2]] } else { [empty_log_z(prior)?, out[0], out[1]] };
            if lz.iter().any(|v| !v.is_finite()) {
                return Ok(None);
            }
            Ok(Some([-lz[0], -lz[1], -lz[2]]))
        }
        Route::PredictiveLoo | Route::Prefix => {
            let theta = match theta0 {
                Theta0::Fixed(t) => t.clone(),
                Theta0::FromPrior => sample_prior(prior, &mut stream(seed, r as u64, 1))?,
            };
            if route == Route::PredictiveLoo {
                if n < 2 {
                    return Err(Error::InvalidInput("the predictive route needs N ≥ 2".into()));
                }
                let data = simulate(model, &theta, n, &mut rng)?;
                let g = match log_evidence_auto(model, prior, &data) {
                    Ok(e) if e.log_z.is_finite() => -e.log_z,
                    Ok(_) => return Ok(None),
                    Err(e) if divergent(&e) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let (ce_n, ce_loo) = match predictive_cross_entropies(model, prior, &theta, &data) {
                    Ok(v) => v,
                    Err(e) if divergent(&e) => return Ok(None),
                    Err(e) => return Err(e),
                };
                if !(ce_n.is_finite() && ce_loo.is_finite()) {
                    return Ok(None);
                }
                return Ok(Some([g - ce_loo, g, g + ce_n]));
            }
            let data = simulate(model, &theta, n + 1, &mut rng)?;
            let mut lz = [0.0; 3];
            for (j, size) in [n as i64 - 1, n as i64, n as i64 + 1].into_iter().enumerate() {
                lz[j] = if size == 0 {
                    empty_log_z(prior)?
                } else {
                    match log_evidence_auto(model, prior, &data.prefix(size as usize)?) {
                        Ok(e) => e.log_z,
                        Err(e) if divergent(&e) => return Ok(None),
                        Err(e) => return Err(e),
                    }
                };
            }
            if lz.iter().any(|v| !v.is_finite()) {
                return Ok(None);
            }
            Ok(Some([-lz[0], -lz[1], -lz[2]]))
        }
        Route::Statistic | Route::Auto => unreachable!("handled by the caller"),
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn statistic_g(model: &dyn Model, prior: &Prior, theta: &ParamPoint, n: f64) -> Result<f64> {
    match model.statistic_free_energy(prior, theta, n) {
        Some(Ok(s)) => Ok(s.excess + s.h0.map_or(0.0, |h| n * h)),
        Some(Err(e)) => Err(e),
        None => Err(Error::NotSupported(format!("{} has no sufficient-statistic route", model.id()))),
    }
}

/// Disorder average at sample size `n` (a real number only for models with a
/// continuous size variable).
pub fn disorder_average(
    model: &dyn Model,
    prior: &Prior,
    theta0: &Theta0,
    n: f64,
    opts: &ThermoOptions,
) -> Result<ThermoReport> {
    let continuous = model.continuous_size();
    if !(n > 0.0) || (!continuous && n.fract() != 0.0) {
        return Err(Error::InvalidInput(format!("sample size {n} must be a positive integer")));
    }
    if let Theta0::Fixed(t) = theta0 {
        model.param_space().check(t)?;
    }
    let route = resolve_route(model, prior, theta0, n, opts.route);
    let theta_label = match theta0 {
        Theta0::Fixed(t) => t.label(),
        Theta0::FromPrior => "prior".into(),
    };
    let mut report = ThermoReport {
        model: model.id(),
        theta0: theta_label,
        n,
        replicates: 1,
        seed: opts.seed,
        fbar: 0.0,
        fse: 0.0,
        ubar: 0.0,
        use_: 0.0,
        cbar: 0.0,
        cse: 0.0,
        sbar: 0.0,
        sse: 0.0,
        g: [0.0; 3],
        route,
        divergent: 0,
    };
    if route == Route::Statistic {
        let theta = match theta0 {
            Theta0::Fixed(t) => t,
            Theta0::FromPrior => return Err(Error::NotSupported("the statistic route needs a fixed θ0".into())),
        };
        let (g, q) = if continuous {
            let g = derivatives(&mut |s| statistic_g(model, prior, theta, s), n)?;
            (g, quantities_from_derivatives(n, g))
        } else {
            let gm = if n >= 2.0 { statistic_g(model, prior, theta, n - 1.0)? } else { -empty_log_z(prior)? };
            let g = [gm, statistic_g(model, prior, theta, n)?, statistic_g(model, prior, theta, n + 1.0)?];
            (g, quantities_from_triple(n, g))
        };
        report.g = g;
        [report.fbar, report.ubar, report.cbar, report.sbar] = q;
        return Ok(report);
    }
    if continuous && n.fract() != 0.0 {
        return Err(Error::InvalidInput("non-integer sizes need the statistic route".into()));
    }
    if opts.replicates < 2 {
        return Err(Error::InvalidInput("at least two replicates are needed for standard errors".into()));
    }
    let ni = n as usize;
    let results: Vec<Result<Option<[f64; 3]>>> = (0..opts.replicates)
        .into_par_iter()
        .map(|r| replicate_triple(model, prior, theta0, ni, route, opts.seed, r))
        .collect();
    let mut triples = Vec::with_capacity(results.len());
    let mut divergent = 0;
    for r in results {
        match r? {
            Some(t) => triples.push(t),
            None => divergent += 1,
        }
    }
    if divergent as f64 > opts.max_divergent_fraction * opts.replicates as f64 {
        return Err(Error::Divergence(format!(
            "{divergent} of {} replicates have a divergent evidence at N={n}",
            opts.replicates
        )));
    }
    if triples.len() < 2 {
        return Err(Error::Divergence("fewer than two finite replicates".into()));
    }
    let per: Vec<[f64; 4]> = triples.iter().map(|&t| quantities_from_triple(n, t)).collect();
    let col = |k: usize| mean_se(&per.iter().map(|q| q[k]).collect::<Vec<_>>());
    let g = [0, 1, 2].map(|k| triples.iter().map(|t| t[k]).sum::<f64>() / triples.len() as f64);
    let q = quantities_from_triple(n, g);
    report.g = g;
    [report.fbar, report.ubar, report.cbar, report.sbar] = q;
    report.fse = col(0).1;
    report.use_ = col(1).1;
    report.cse = col(2).1;
    report.sse = col(3).1;
    report.replicates = triples.len();
    report.divergent = divergent;
    Ok(report)
}

/// `disorder_average` over a list of sizes, sharing the master seed.
pub fn disorder_sweep(
    model: &dyn Model,
    prior: &Prior,
    theta0: &Theta0,
    sizes: &[f64],
    opts: &ThermoOptions,
) -> Result<Vec<ThermoReport>> {
    sizes.iter().map(|&n| disorder_average(model, prior, theta0, n, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_identities() {
        let g = [10.3, 11.0, 11.9];
        let [f, u, _c, s] = quantities_from_triple(7.0, g);
        assert!((s - 7.0 * (u - f)).abs() < 1e-12);
    }

    #[test]
    fn derivative_stencil_on_polynomial() {
        let d = derivatives(&mut |t| Ok(t * t * t), 2.0).unwrap();
        assert!((d[1] - 12.0).abs() < 1e-9);
        assert!((d[2] - 12.0).abs() < 1e-6);
    }
}

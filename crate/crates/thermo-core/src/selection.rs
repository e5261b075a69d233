//! Inference on model identity: the five-model posterior experiment, AIC
//! and the Lindley–Bartlett thresholds.

use crate::error::{Error, Result};
use crate::evidence::log_evidence_auto;
use crate::gpi::{count_models, gpi_exact_symmetric, Region};
use crate::model::Model;
use crate::oracles::SymmetricKind;
use crate::prior::Prior;
use crate::rng::{stream, stream_seed};
use crate::space::{Dataset, ParamPoint};
use crate::special::log_sum_exp;
use crate::thermo::simulate;
use crate::zoo::{Exponential, NormalFixed, NormalMeanFlat, NormalMeanVar, UniformSupport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// The five models of the inference experiment, with their generative
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZooModel {
    /// 𝒩: μ = 5, σ = 1, no free parameters.
    Normal,
    /// 𝒩(μ) with σ = 1; data from μ0 = 6.
    NormalMean,
    /// 𝒩(μ, σ); data from μ0 = 5, σ0 = 0.75.
    NormalMeanVar,
    /// Exp(λ); data from λ0 = 2.
    Exponential,
    /// 𝒰(L); data from L0 = 10.
    Uniform,
}

impl ZooModel {
    pub const ALL: [ZooModel; 5] =
        [ZooModel::Normal, ZooModel::NormalMean, ZooModel::NormalMeanVar, ZooModel::Exponential, ZooModel::Uniform];

    pub fn label(self) -> &'static str {
        match self {
            ZooModel::Normal => "N",
            ZooModel::NormalMean => "N(mu)",
            ZooModel::NormalMeanVar => "N(mu,sigma)",
            ZooModel::Exponential => "Exp(lambda)",
            ZooModel::Uniform => "U(L)",
        }
    }

    pub fn parse(s: &str) -> Result<ZooModel> {
        Ok(match s {
            "N" | "normal" => ZooModel::Normal,
            "N(mu)" | "normal-mean" => ZooModel::NormalMean,
            "N(mu,sigma)" | "normal-meanvar" => ZooModel::NormalMeanVar,
            "Exp(lambda)" | "exponential" => ZooModel::Exponential,
            "U(L)" | "uniform" => ZooModel::Uniform,
            _ => return Err(Error::InvalidInput(format!("unknown experiment model '{s}'"))),
        })
    }

    pub fn model(self) -> Box<dyn Model> {
        match self {
            ZooModel::Normal => Box::new(NormalFixed { mu: vec![5.0], sigma: 1.0 }),
            ZooModel::NormalMean => Box::new(NormalMeanFlat { d: 1, sigma: 1.0 }),
            ZooModel::NormalMeanVar => Box::new(NormalMeanVar { d: 1 }),
            ZooModel::Exponential => Box::new(Exponential),
            ZooModel::Uniform => Box::new(UniformSupport),
        }
    }

    pub fn theta0(self) -> ParamPoint {
        match self {
            ZooModel::Normal => ParamPoint::empty(),
            ZooModel::NormalMean => ParamPoint::continuous(vec![6.0]),
            ZooModel::NormalMeanVar => ParamPoint::continuous(vec![5.0, 0.75]),
            ZooModel::Exponential => ParamPoint::continuous(vec![2.0]),
            ZooModel::Uniform => ParamPoint::continuous(vec![10.0]),
        }
    }

    /// The symmetric family whose closed-form GPI prior applies.
    pub fn symmetric(self) -> Option<SymmetricKind> {
        match self {
            ZooModel::Normal => None,
            ZooModel::NormalMean => Some(SymmetricKind::NormalMeanFlat { d: 1, sigma: 1.0 }),
            ZooModel::NormalMeanVar => Some(SymmetricKind::NormalMeanVar { d: 1 }),
            ZooModel::Exponential => Some(SymmetricKind::Exponential),
            ZooModel::Uniform => Some(SymmetricKind::UniformSupport),
        }
    }

    /// Fixed-support prior used by the informative mode.
    pub fn informative_prior(self) -> Result<Prior> {
        match self {
            ZooModel::Normal => Ok(Prior::flat()),
            ZooModel::NormalMean => Prior::normalized_power_on_box(vec![0.0], vec![(0.0, 10.0)]),
            ZooModel::NormalMeanVar => {
                Prior::normalized_power_on_box(NormalMeanVar { d: 1 }.shape_exponents(), vec![(0.0, 10.0), (0.1, 10.0)])
            }
            ZooModel::Exponential => Prior::normalized_power_on_box(vec![-1.0], vec![(0.1, 10.0)]),
            // 1/L cannot be normalized on an interval touching zero
            ZooModel::Uniform => Prior::normalized_power_on_box(vec![0.0], vec![(0.0, 10.0)]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PriorMode {
    /// Unnormalized GPI density w.
    Gpi,
    /// w/M on the full parameter manifold (zero weight when M diverges).
    NormalizedJeffreys,
    /// Normalized priors on fixed boxes.
    InformativeFixedSupport,
}

impl PriorMode {
    pub fn name(self) -> &'static str {
        match self {
            PriorMode::Gpi => "gpi",
            PriorMode::NormalizedJeffreys => "normalized",
            PriorMode::InformativeFixedSupport => "informative",
        }
    }

    pub fn parse(s: &str) -> Result<PriorMode> {
        match s {
            "gpi" => Ok(PriorMode::Gpi),
            "normalized" | "normalizedJeffreys" => Ok(PriorMode::NormalizedJeffreys),
            "informative" | "informativeFixedSupport" => Ok(PriorMode::InformativeFixedSupport),
            _ => Err(Error::InvalidInput(format!("unknown prior mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub models: Vec<ZooModel>,
    pub mode: PriorMode,
    #[serde(rename = "N")]
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { models: ZooModel::ALL.to_vec(), mode: PriorMode::Gpi, n: 20, replicates: 200, seed: 1 }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput("the experiment needs N ≥ 2".into()));
        }
        if self.models.is_empty() || self.replicates == 0 {
            return Err(Error::InvalidInput("at least one model and one replicate are required".into()));
        }
        Ok(())
    }
}

/// N iid draws from model `id` at θ0; deterministic per seed.
pub fn simulate_dataset(id: ZooModel, theta0: &ParamPoint, n: usize, seed: u64) -> Result<Dataset> {
    let model = id.model();
    model.param_space().check(theta0)?;
    simulate(model.as_ref(), theta0, n, &mut stream(seed, 0, 0))
}

/// A window that the divergence test grows from; only its shape matters.
fn nominal_region(model: &dyn Model) -> Region {
    let space = model.param_space();
    Region {
        continuous: space.continuous.iter().map(|d| if d.lo >= 0.0 { (1.0, 2.0) } else { (-1.0, 1.0) }).collect(),
        discrete: space.discrete.iter().map(|_| (1, 2)).collect(),
    }
}

/// log Z of one model under the chosen prior mode; −∞ means zero weight.
pub fn model_log_evidence(id: ZooModel, mode: PriorMode, data: &Dataset) -> Result<f64> {
    let model = id.model();
    let prior = match (mode, id.symmetric()) {
        (PriorMode::InformativeFixedSupport, _) => id.informative_prior()?,
        (_, None) => Prior::flat(),
        (_, Some(kind)) => match gpi_exact_symmetric(kind, data.len() as f64) {
            Ok(g) => g.prior,
            // infinite effective complexity: the model gets no weight
            Err(Error::Divergence(_)) => return Ok(f64::NEG_INFINITY),
            Err(e) => return Err(e),
        },
    };
    let prior = if mode == PriorMode::NormalizedJeffreys {
        let count = count_models(&prior, &nominal_region(model.as_ref()))?;
        if count.divergent {
            return Ok(f64::NEG_INFINITY);
        }
        prior.clone().with_log_c(prior.log_c - count.log_m)
    } else {
        prior
    };
    match log_evidence_auto(model.as_ref(), &prior, data) {
        Ok(e) => Ok(e.log_z),
        Err(Error::Divergence(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Posterior model probabilities Z_I/Σ Z_J.
pub fn model_posteriors(data: &Dataset, config: &ExperimentConfig) -> Result<Vec<f64>> {
    let logs = config
        .models
        .iter()
        .map(|&m| model_log_evidence(m, config.mode, data))
        .collect::<Result<Vec<f64>>>()?;
    posteriors_from_log_evidence(&logs)
}

pub fn posteriors_from_log_evidence(logs: &[f64]) -> Result<Vec<f64>> {
    if logs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Numeric("log evidence is NaN or +inf".into()));
    }
    let total = log_sum_exp(logs);
    if total == f64::NEG_INFINITY {
        return Err(Error::NotDefined("every model has zero evidence; the posterior is undefined".into()));
    }
    Ok(logs.iter().map(|v| (v - total).exp()).collect())
}

/// Replicate-averaged posterior probabilities: rows are generators,
/// columns inference models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorMatrix {
    pub models: Vec<ZooModel>,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub replicates: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub mode: PriorMode,
}

impl PosteriorMatrix {
    pub const CSV_HEADER: [&'static str; 8] =
        ["generator", "inferencer", "meanPosterior", "stderr", "replicates", "N", "seed", "priorMode"];

    pub fn records(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for (i, g) in self.models.iter().enumerate() {
            for (j, m) in self.models.iter().enumerate() {
                out.push(vec![
                    g.label().to_string(),
                    m.label().to_string(),
                    format!("{}", self.mean[i][j]),
                    format!("{}", self.stderr[i][j]),
                    self.replicates.to_string(),
                    self.n.to_string(),
                    self.seed.to_string(),
                    self.mode.name().to_string(),
                ]);
            }
        }
        out
    }

    /// Column index of the largest mean posterior in each row.
    pub fn row_argmax(&self) -> Vec<usize> {
        self.mean
            .iter()
            .map(|row| row.iter().enumerate().fold(0, |b, (j, v)| if *v > row[b] { j } else { b }))
            .collect()
    }
}

/// Draw replicate datasets from every generator and average the posteriors.
pub fn run_fig6(config: &ExperimentConfig) -> Result<PosteriorMatrix> {
    config.validate()?;
    let k = config.models.len();
    let mut mean = vec![vec![0.0; k]; k];
    let mut stderr = vec![vec![0.0; k]; k];
    for (g, &gen) in config.models.iter().enumerate() {
        let rows: Vec<Vec<f64>> = (0..config.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = stream_seed(config.seed, r as u64, g as u64);
                let data = simulate_dataset(gen, &gen.theta0(), config.n, seed)?;
                model_posteriors(&data, config)
            })
            .collect::<Result<_>>()?;
        let reps = rows.len() as f64;
        for j in 0..k {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / reps;
            let var = if reps > 1.0 { rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (reps - 1.0) } else { 0.0 };
            mean[g][j] = m;
            stderr[g][j] = (var / reps).sqrt();
        }
    }
    Ok(PosteriorMatrix {
        models: config.models.clone(),
        mean,
        stderr,
        replicates: config.replicates,
        n: config.n,
        seed: config.seed,
        mode: config.mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aic {
    /// −log q(x^N|θ̂) + K in nats.
    pub value: f64,
    /// The maximum sits on the edge of the parameter space.
    pub boundary: bool,
}

/// Akaike information criterion in nats.
pub fn aic(model: &dyn Model, data: &Dataset) -> Result<Aic> {
    let (theta, boundary) = match model.mle_flagged(data) {
        Some(r) => r?,
        None => return Err(Error::NotSupported(format!("{} has no maximum-likelihood estimate", model.id()))),
    };
    let ll: f64 = data.iter().map(|x| model.log_likelihood(x, &theta)).sum();
    Ok(Aic { value: -ll + model.param_count() as f64, boundary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LindleyMode {
    Gpi,
    Normalized,
}

/// log M for a flat prior of length L on a normal mean, with δμ = σ/√N.
pub fn lindley_log_m(l: f64, sigma: f64, n: f64) -> f64 {
    (l * n.sqrt() / sigma).ln() - 0.5 * (2.0 * PI).ln()
}

/// Smallest |μ̂|/δμ at which the μ ≠ 0 model wins.
pub fn lindley_threshold(l: f64, sigma: f64, n: f64, mode: LindleyMode) -> Result<f64> {
    if !(l > 0.0 && sigma > 0.0 && n > 0.0) {
        return Err(Error::InvalidInput("L, σ and N must be positive".into()));
    }
    match mode {
        LindleyMode::Gpi => Ok(2f64.sqrt()),
        LindleyMode::Normalized => {
            let lm = lindley_log_m(l, sigma, n);
            if lm <= 0.0 {
                return Err(Error::NotDefined(format!("M = {:.4} ≤ 1: the threshold is undefined", lm.exp())));
            }
            Ok((2.0 * lm).sqrt())
        }
    }
}

/// N points with sample mean `mean` and unit-σ scatter.
fn data_with_mean(mean: f64, sigma: f64, n: usize) -> Result<Dataset> {
    let mut v: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { sigma } else { -sigma }).collect();
    if n % 2 == 1 {
        v[n - 1] = 0.0;
    }
    Dataset::scalar(v.into_iter().map(|x| x + mean).collect())
}

/// log Z(μ≠0) − log Z(μ=0) computed through the library's evidences.
pub fn lindley_log_bayes_factor(l: f64, sigma: f64, n: usize, mode: LindleyMode, y: f64) -> Result<f64> {
    let dmu = sigma / (n as f64).sqrt();
    let data = data_with_mean(y * dmu, sigma, n)?;
    let null = NormalFixed { mu: vec![0.0], sigma };
    let alt = NormalMeanFlat { d: 1, sigma };
    let prior = match mode {
        LindleyMode::Gpi => gpi_exact_symmetric(SymmetricKind::NormalMeanFlat { d: 1, sigma }, n as f64)?.prior,
        LindleyMode::Normalized => Prior::normalized_power_on_box(vec![0.0], vec![(-0.5 * l, 0.5 * l)])?,
    };
    Ok(log_evidence_auto(&alt, &prior, &data)?.log_z - log_evidence_auto(&null, &Prior::flat(), &data)?.log_z)
}

/// Brute-force crossing: scan μ̂/δμ in steps of `step`, then bisect.
pub fn lindley_crossing(l: f64, sigma: f64, n: usize, mode: LindleyMode, step: f64, y_max: f64) -> Result<f64> {
    let f = |y: f64| lindley_log_bayes_factor(l, sigma, n, mode, y);
    let mut a = 0.0;
    let mut fa = f(a)?;
    if fa >= 0.0 {
        return Ok(0.0);
    }
    while a < y_max {
        let b = a + step;
        let fb = f(b)?;
        if fb >= 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if f(mid)? >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        (a, fa) = (b, fb);
    }
    let _ = fa;
    Err(Error::NotDefined(format!("no crossing below μ̂/δμ = {y_max}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_gamma;
    use crate::zoo::ExpMixture2;

    #[test]
    fn simulation_is_deterministic_and_in_support() {
        let a = simulate_dataset(ZooModel::Uniform, &ZooModel::Uniform.theta0(), 50, 7).unwrap();
        let b = simulate_dataset(ZooModel::Uniform, &ZooModel::Uniform.theta0(), 50, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|&x| (0.0..=10.0).contains(&x)));
        assert!(simulate_dataset(ZooModel::Exponential, &ParamPoint::continuous(vec![-1.0]), 5, 1).is_err());
    }

    #[test]
    fn single_model_posterior_is_one() {
        let d = simulate_dataset(ZooModel::Exponential, &ZooModel::Exponential.theta0(), 20, 3).unwrap();
        let cfg = ExperimentConfig { models: vec![ZooModel::Exponential], ..Default::default() };
        assert_eq!(model_posteriors(&d, &cfg).unwrap(), vec![1.0]);
        assert!(posteriors_from_log_evidence(&[f64::NEG_INFINITY; 3]).is_err());
    }

    #[test]
    fn gpi_evidence_matches_hand_formula() {
        // exponential: log Z = log c + lnΓ(N) − N log Σx
        let d = simulate_dataset(ZooModel::Exponential, &ZooModel::Exponential.theta0(), 20, 5).unwrap();
        let s: f64 = d.values().iter().sum();
        let lc = SymmetricKind::Exponential.log_c(20.0);
        let want = lc + ln_gamma(20.0) - 20.0 * s.ln();
        let got = model_log_evidence(ZooModel::Exponential, PriorMode::Gpi, &d).unwrap();
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn normalized_mode_rejects_improper_families() {
        let d = simulate_dataset(ZooModel::NormalMean, &ZooModel::NormalMean.theta0(), 20, 1).unwrap();
        for m in &ZooModel::ALL[1..] {
            assert_eq!(model_log_evidence(*m, PriorMode::NormalizedJeffreys, &d).unwrap(), f64::NEG_INFINITY);
        }
        let cfg = ExperimentConfig { mode: PriorMode::NormalizedJeffreys, ..Default::default() };
        assert_eq!(model_posteriors(&d, &cfg).unwrap()[0], 1.0);
    }

    #[test]
    fn informative_uniform_matches_closed_form() {
        let d = simulate_dataset(ZooModel::Uniform, &ZooModel::Uniform.theta0(), 20, 11).unwrap();
        let m = d.values().iter().cloned().fold(0.0, f64::max);
        let n = 20.0;
        // ∫_m^10 L^{−N}/10 dL
        let want = ((m.powf(1.0 - n) - 10f64.powf(1.0 - n)) / (10.0 * (n - 1.0))).ln();
        let got = model_log_evidence(ZooModel::Uniform, PriorMode::InformativeFixedSupport, &d).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn informative_meanvar_matches_brute_force() {
        let d = simulate_dataset(ZooModel::NormalMeanVar, &ZooModel::NormalMeanVar.theta0(), 20, 4).unwrap();
        let got = model_log_evidence(ZooModel::NormalMeanVar, PriorMode::InformativeFixedSupport, &d).unwrap();
        // midpoint rule on a fine (μ, log σ) grid
        let prior = ZooModel::NormalMeanVar.informative_prior().unwrap();
        let model = NormalMeanVar { d: 1 };
        let (nm, ns) = (800, 800);
        let (u0, u1) = (0.1f64.ln(), 10f64.ln());
        let mut terms = Vec::new();
        for i in 0..nm {
            let mu = 10.0 * (i as f64 + 0.5) / nm as f64;
            for j in 0..ns {
                let u = u0 + (u1 - u0) * (j as f64 + 0.5) / ns as f64;
                let th = ParamPoint::continuous(vec![mu, u.exp()]);
                let ll: f64 = d.iter().map(|x| model.log_likelihood(x, &th)).sum();
                terms.push(prior.log_density(&th) + u + ll);
            }
        }
        let cell = (10.0 / nm as f64 * (u1 - u0) / ns as f64).ln();
        let want = log_sum_exp(&terms) + cell;
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }

    #[test]
    fn aic_closed_forms() {
        let d = Dataset::scalar(vec![4.0, 5.5, 6.0]).unwrap();
        let a = aic(&NormalFixed { mu: vec![5.0], sigma: 1.0 }, &d).unwrap();
        let want = 1.5 * (2.0 * PI).ln() + (1.0 + 0.25 + 1.0) / 2.0;
        assert!((a.value - want).abs() < 1e-12);
        let a = aic(&UniformSupport, &d).unwrap();
        assert!((a.value - (3.0 * 6f64.ln() + 1.0)).abs() < 1e-12);
        let a = aic(&Exponential, &d).unwrap();
        let lam: f64 = 3.0 / 15.5;
        assert!((a.value - (-(3.0 * lam.ln()) + lam * 15.5 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn mixture_aic_flags_boundary_on_single_exponential_data() {
        let d = simulate_dataset(ZooModel::Exponential, &ZooModel::Exponential.theta0(), 200, 2).unwrap();
        let a = aic(&ExpMixture2::default(), &d).unwrap();
        assert!(a.value.is_finite());
        let single = aic(&Exponential, &d).unwrap().value;
        // three parameters and a likelihood at least as good
        assert!(a.value <= single + 2.0 + 1e-6);
    }

    #[test]
    fn lindley_thresholds() {
        assert_eq!(lindley_threshold(1e6, 1.0, 100.0, LindleyMode::Gpi).unwrap(), 2f64.sqrt());
        let t = lindley_threshold(100.0, 1.0, 100.0, LindleyMode::Normalized).unwrap();
        assert!((t - (2.0 * (1000.0 / (2.0 * PI).sqrt()).ln()).sqrt()).abs() < 1e-12);
        assert!(lindley_threshold(0.1, 1.0, 1.0, LindleyMode::Normalized).is_err());
        let big = lindley_threshold(1e12, 1.0, 100.0, LindleyMode::Normalized).unwrap();
        assert!(big > t);
    }
}

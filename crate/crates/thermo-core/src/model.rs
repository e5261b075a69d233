//! The sampling-model abstraction shared by every routine.

use crate::error::Result;
use crate::prior::Prior;
use crate::rng::StreamRng;
use crate::space::{Dataset, ParamPoint, ParamSpace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EvidenceMethod {
    ClosedForm,
    Quadrature,
    DiscreteSum,
    MonteCarlo,
}

/// One log-evidence value with its provenance and error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEstimate {
    pub log_z: f64,
    pub method: EvidenceMethod,
    /// Absolute error bound on `log_z`; zero exactly for closed forms.
    pub error_bound: f64,
}

impl EvidenceEstimate {
    pub fn closed(log_z: f64) -> Self {
        EvidenceEstimate { log_z, method: EvidenceMethod::ClosedForm, error_bound: 0.0 }
    }
}

/// The true parameter used for disorder averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Theta0 {
    Fixed(ParamPoint),
    /// Each replicate draws θ0 from the (proper) inference prior.
    FromPrior,
}

/// Disorder-averaged −E[log Z] at one sample size, from a deterministic
/// sufficient-statistic computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticFreeEnergy {
    /// Ḡ(n) − n·H0.
    pub excess: f64,
    /// Per-observation entropy H0(θ0), when it is well defined.
    pub h0: Option<f64>,
}

/// A parametric sampling model q(x|θ).
///
/// Only the first five methods are mandatory; the rest unlock faster or
/// exact evaluation routes and default to "not available".
pub trait Model: Send + Sync {
    /// Registry-style identifier, e.g. `exponential`.
    fn id(&self) -> String;
    fn obs_dim(&self) -> usize;
    fn param_space(&self) -> ParamSpace;
    /// log q(x|θ); `-inf` off support.
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64;
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64>;

    /// Number of parameters K.
    fn param_count(&self) -> usize {
        self.param_space().dim()
    }

    /// Regular models have a Fisher information everywhere on the support.
    fn is_regular(&self) -> bool {
        true
    }

    /// Shannon entropy H0(θ) of one observation.
    fn entropy(&self, _theta: &ParamPoint) -> Option<f64> {
        None
    }

    fn fisher_closed_form(&self, _theta: &ParamPoint) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// Maximum-likelihood estimate, when available in closed form.
    fn mle(&self, _data: &Dataset) -> Option<Result<ParamPoint>> {
        None
    }

    /// MLE together with a flag set when it lies on the edge of the space.
    fn mle_flagged(&self, data: &Dataset) -> Option<Result<(ParamPoint, bool)>> {
        self.mle(data).map(|r| r.map(|p| (p, false)))
    }

    /// A point near the posterior bulk, used to seed quadrature.
    fn param_hint(&self, _data: &Dataset) -> ParamPoint {
        let s = self.param_space();
        ParamPoint {
            continuous: s
                .continuous
                .iter()
                .map(|d| match (d.lo.is_finite(), d.hi.is_finite()) {
                    (true, true) => 0.5 * (d.lo + d.hi),
                    (true, false) => d.lo + 1.0,
                    (false, true) => d.hi - 1.0,
                    _ => 0.0,
                })
                .collect(),
            discrete: s.discrete.iter().map(|d| d.lo.unwrap_or(0)).collect(),
        }
    }

    /// Closed-form log Z for `data` under `prior`.
    fn exact_log_evidence(&self, _prior: &Prior, _data: &Dataset) -> Option<Result<f64>> {
        None
    }

    /// Model-specific numerical evidence (e.g. a dedicated grid).
    fn custom_log_evidence(&self, _prior: &Prior, _data: &Dataset) -> Option<Result<EvidenceEstimate>> {
        None
    }

    /// Draws of log Z at each size in `sizes` from the exact distribution of
    /// the log evidence, coupled across sizes through shared uniforms.
    fn coupled_log_evidence(
        &self,
        _prior: &Prior,
        _theta0: &Theta0,
        _sizes: &[usize],
        _rng: &mut StreamRng,
    ) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Deterministic −E[log Z] at size `n` through a sufficient statistic.
    fn statistic_free_energy(&self, _prior: &Prior, _theta0: &ParamPoint, _n: f64) -> Option<Result<StatisticFreeEnergy>> {
        None
    }

    /// Image of θ under a label symmetry of the likelihood (mixtures).
    fn mirror(&self, _theta: &ParamPoint) -> Option<ParamPoint> {
        None
    }

    /// Whether the sample size is a continuous variable (e.g. exposure time).
    fn continuous_size(&self) -> bool {
        false
    }

    /// Quadrature rule (nodes, weights) for expectations over q(·|θ0).
    fn observation_rule(&self, _theta0: &ParamPoint) -> Option<Vec<(Vec<f64>, f64)>> {
        None
    }

    /// Predictive cross entropies of a dataset of size N:
    /// (−E_{q0} log q(x|x^N), mean over i of −E_{q0} log q(x|x^{≠i})).
    fn predictive_cross_entropies(
        &self,
        _prior: &Prior,
        _theta0: &ParamPoint,
        _data: &Dataset,
    ) -> Option<Result<(f64, f64)>> {
        None
    }
}

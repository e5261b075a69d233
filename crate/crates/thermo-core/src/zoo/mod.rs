//! Concrete models.

pub mod mixture;
pub mod normal;
pub mod poisson;
pub mod simple;
pub mod theta;

pub use mixture::{mixture_log_evidence, ExpMixture2};
pub use normal::{NormalConjugate, NormalDiscreteMean, NormalFixed, NormalMeanFlat, NormalMeanVar};
pub use poisson::{poisson_log_z, PoissonStoich, PoissonZMode};
pub use simple::{Exponential, UniformSupport};

use crate::error::{Error, Result};
use crate::model::{Model, Theta0};
use crate::prior::Prior;
use crate::rng::stream;
use crate::space::{Dataset, ParamPoint};

/// Closed-form log Z, or a not-supported error.
pub fn exact_log_evidence(model: &dyn Model, prior: &Prior, data: &Dataset) -> Result<f64> {
    model
        .exact_log_evidence(prior, data)
        .unwrap_or_else(|| Err(Error::NotSupported(format!("{} has no closed-form evidence for this prior", model.id()))))
}

/// One exact draw of log Z(X^N) without materializing a dataset.
pub fn sample_log_evidence(model: &dyn Model, prior: &Prior, theta0: &ParamPoint, n: usize, seed: u64) -> Result<f64> {
    let mut rng = stream(seed, 0, 0);
    match model.coupled_log_evidence(prior, &Theta0::Fixed(theta0.clone()), &[n], &mut rng) {
        Some(r) => r.map(|v| v[0]),
        None => Err(Error::NotSupported(format!("{} has no log-evidence sampler", model.id()))),
    }
}

/// F̄ from the sufficient-statistic decomposition; when the per-sample
/// entropy is not defined (counting models) the excess F̄ − H0 is returned.
pub fn sufficient_free_energy(model: &dyn Model, prior: &Prior, theta0: &ParamPoint, n: f64) -> Result<f64> {
    match model.statistic_free_energy(prior, theta0, n) {
        Some(r) => r.map(|s| (s.excess + s.h0.map_or(0.0, |h| n * h)) / n),
        None => Err(Error::NotSupported(format!("{} has no sufficient-statistic route", model.id()))),
    }
}

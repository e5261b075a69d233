//! Model strings such as `poisson:t=500,m0=6` and prior choices.

use crate::error::{Error, Result};
use crate::gpi::{gpi_exact_symmetric, gpi_from_csv};
use crate::model::{Model, Theta0};
use crate::oracles::{OracleKind, SymmetricKind};
use crate::prior::Prior;
use crate::space::ParamPoint;
use crate::zoo::{
    ExpMixture2, Exponential, NormalConjugate, NormalDiscreteMean, NormalFixed, NormalMeanFlat, NormalMeanVar,
    PoissonStoich, UniformSupport,
};
use std::collections::BTreeMap;

/// Every name understood by [`parse_model`].
pub const MODEL_NAMES: [&str; 9] = [
    "normal-conj",
    "normal-fixed",
    "normal-mean",
    "normal-meanvar",
    "normal-discrete",
    "exponential",
    "uniform",
    "poisson",
    "mixture",
];

/// A model with its true parameter and default ("natural") prior.
pub struct RegistryEntry {
    /// Canonical string with every parameter spelled out.
    pub spec: String,
    pub model: Box<dyn Model>,
    pub theta0: Theta0,
    pub natural_prior: Prior,
    /// Closed-form GPI family, when there is one.
    pub symmetric: Option<SymmetricKind>,
    /// True scale for the symmetric family (σ0, 1/λ0 or L0).
    pub scale: f64,
    /// Analytic oracle under the natural prior.
    pub oracle: Option<OracleKind>,
}

impl std::fmt::Debug for RegistryEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegistryEntry").field("spec", &self.spec).field("theta0", &self.theta0).finish()
    }
}

struct Params {
    name: String,
    map: BTreeMap<String, String>,
    used: Vec<String>,
}

impl Params {
    fn parse(s: &str) -> Result<Params> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut map = BTreeMap::new();
        for kv in rest.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("expected key=value, found '{kv}' in '{s}'")))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::InvalidInput(format!("parameter '{k}' given twice in '{s}'")));
            }
        }
        Ok(Params { name: name.trim().to_string(), map, used: Vec::new() })
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.push(key.to_string());
        self.map.get(key).cloned()
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::InvalidInput(format!("{}: '{key}={v}' is not a number", self.name))),
        }
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        if self.map.contains_key(key) {
            self.f64_or(key, 0.0).map(Some)
        } else {
            self.used.push(key.to_string());
            Ok(None)
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v.parse::<usize>() {
                Ok(c) if c >= 1 => Ok(c),
                _ => Err(Error::InvalidInput(format!("{}: '{key}={v}' is not a positive count", self.name))),
            },
        }
    }

    fn i64_or(&mut self, key: &str, default: i64) -> Result<i64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::InvalidInput(format!("{}: '{key}={v}' is not an integer", self.name))),
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("{}: {key} must be positive, got {v}", self.name)));
        }
        Ok(v)
    }

    fn finish(self) -> Result<()> {
        for k in self.map.keys() {
            if !self.used.contains(k) {
                return Err(Error::InvalidInput(format!("{}: unknown parameter '{k}'", self.name)));
            }
        }
        Ok(())
    }
}

fn fmt_list(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

/// Parse a registry string into a model, true parameter and natural prior.
pub fn parse_model(s: &str) -> Result<RegistryEntry> {
    let mut p = Params::parse(s)?;
    let name = p.name.clone();
    let entry = match name.as_str() {
        "normal-conj" => {
            let k = p.usize_or("K", 1)?;
            let sigma = p.positive("sigma", 1.0)?;
            let sigma_p = p.positive("sigma_p", 1.0)?;
            let mu_p = p.f64_or("mu_p", 0.0)?;
            let mu0 = p.opt_f64("mu0")?;
            let m = NormalConjugate { k, sigma, mu_p, sigma_p };
            let n0 = m.n0();
            let theta0 = match mu0 {
                Some(v) => Theta0::Fixed(ParamPoint::continuous(vec![v; k])),
                None => Theta0::FromPrior,
            };
            let mut spec = fmt_list(&[("K", k.to_string()), ("sigma", sigma.to_string()), ("sigma_p", sigma_p.to_string()), ("mu_p", mu_p.to_string())]);
            if let Some(v) = mu0 {
                spec.push_str(&format!(",mu0={v}"));
            }
            RegistryEntry {
                spec: format!("normal-conj:{spec}"),
                natural_prior: m.natural_prior(),
                model: Box::new(m),
                theta0,
                symmetric: None,
                scale: sigma,
                oracle: Some(OracleKind::Conjugate { k, sigma, n0, delta: mu0.map(|v| (v - mu_p) / sigma) }),
            }
        }
        "normal-fixed" => {
            let d = p.usize_or("D", 1)?;
            let mu = p.f64_or("mu", 0.0)?;
            let sigma = p.positive("sigma", 1.0)?;
            RegistryEntry {
                spec: format!("normal-fixed:{}", fmt_list(&[("D", d.to_string()), ("mu", mu.to_string()), ("sigma", sigma.to_string())])),
                model: Box::new(NormalFixed { mu: vec![mu; d], sigma }),
                theta0: Theta0::Fixed(ParamPoint::empty()),
                natural_prior: Prior::flat(),
                symmetric: None,
                scale: sigma,
                oracle: None,
            }
        }
        "normal-mean" => {
            let d = p.usize_or("D", 1)?;
            let sigma = p.positive("sigma", 1.0)?;
            let mu0 = p.f64_or("mu0", 0.0)?;
            let kind = SymmetricKind::NormalMeanFlat { d, sigma };
            RegistryEntry {
                spec: format!("normal-mean:{}", fmt_list(&[("D", d.to_string()), ("sigma", sigma.to_string()), ("mu0", mu0.to_string())])),
                model: Box::new(NormalMeanFlat { d, sigma }),
                theta0: Theta0::Fixed(ParamPoint::continuous(vec![mu0; d])),
                natural_prior: Prior::flat(),
                symmetric: Some(kind),
                scale: sigma,
                oracle: Some(OracleKind::FixedPrior { kind, scale: sigma, log_c: 0.0 }),
            }
        }
        "normal-meanvar" => {
            let d = p.usize_or("D", 1)?;
            let mu0 = p.f64_or("mu0", 0.0)?;
            let sigma0 = p.positive("sigma0", 1.0)?;
            let kind = SymmetricKind::NormalMeanVar { d };
            let m = NormalMeanVar { d };
            let mut th = vec![mu0; d];
            th.push(sigma0);
            RegistryEntry {
                spec: format!("normal-meanvar:{}", fmt_list(&[("D", d.to_string()), ("mu0", mu0.to_string()), ("sigma0", sigma0.to_string())])),
                natural_prior: Prior::power(m.shape_exponents(), 0.0),
                model: Box::new(m),
                theta0: Theta0::Fixed(ParamPoint::continuous(th)),
                symmetric: Some(kind),
                scale: sigma0,
                oracle: Some(OracleKind::FixedPrior { kind, scale: sigma0, log_c: 0.0 }),
            }
        }
        "normal-discrete" => {
            let d = p.usize_or("D", 1)?;
            let sigma = p.positive("sigma", 1.0)?;
            let mu0 = p.i64_or("mu0", 0)?;
            let continuous = p.i64_or("continuous", 0)? != 0;
            RegistryEntry {
                spec: format!(
                    "normal-discrete:{}",
                    fmt_list(&[("D", d.to_string()), ("sigma", sigma.to_string()), ("mu0", mu0.to_string()), ("continuous", (continuous as u8).to_string())])
                ),
                model: Box::new(NormalDiscreteMean { d, sigma, continuous }),
                theta0: Theta0::Fixed(ParamPoint::discrete(vec![mu0; d])),
                natural_prior: Prior::flat(),
                symmetric: None,
                scale: sigma,
                oracle: Some(OracleKind::DiscreteMean { d, sigma }),
            }
        }
        "exponential" => {
            let l0 = p.positive("lambda0", 1.0)?;
            let kind = SymmetricKind::Exponential;
            RegistryEntry {
                spec: format!("exponential:lambda0={l0}"),
                model: Box::new(Exponential),
                theta0: Theta0::Fixed(ParamPoint::continuous(vec![l0])),
                natural_prior: Prior::power(vec![-1.0], 0.0),
                symmetric: Some(kind),
                scale: 1.0 / l0,
                oracle: Some(OracleKind::FixedPrior { kind, scale: 1.0 / l0, log_c: 0.0 }),
            }
        }
        "uniform" => {
            let l0 = p.positive("L0", 1.0)?;
            let kind = SymmetricKind::UniformSupport;
            RegistryEntry {
                spec: format!("uniform:L0={l0}"),
                model: Box::new(UniformSupport),
                theta0: Theta0::Fixed(ParamPoint::continuous(vec![l0])),
                natural_prior: Prior::power(vec![-1.0], 0.0),
                symmetric: Some(kind),
                scale: l0,
                oracle: Some(OracleKind::FixedPrior { kind, scale: l0, log_c: 0.0 }),
            }
        }
        "poisson" => {
            let t = p.positive("t", 1.0)?;
            let m0 = p.i64_or("m0", 1)?;
            let b = p.f64_or("b", 0.0)?;
            if m0 < 1 {
                return Err(Error::InvalidInput(format!("poisson: m0 must be at least 1, got {m0}")));
            }
            let m = PoissonStoich { t, b };
            RegistryEntry {
                spec: format!("poisson:{}", fmt_list(&[("t", t.to_string()), ("m0", m0.to_string()), ("b", b.to_string())])),
                natural_prior: m.natural_prior(),
                model: Box::new(m),
                theta0: Theta0::Fixed(ParamPoint::discrete(vec![m0])),
                symmetric: None,
                scale: 1.0,
                oracle: None,
            }
        }
        "mixture" => {
            let p0 = p.f64_or("p0", 0.5)?;
            let k10 = p.positive("k10", 1.0)?;
            let k20 = p.positive("k20", 1.0)?;
            let d = ExpMixture2::default();
            let kmin = p.positive("kmin", d.kmin)?;
            let kmax = p.positive("kmax", d.kmax)?;
            let n_p = p.usize_or("np", d.n_p)?;
            let n_k = p.usize_or("nk", d.n_k)?;
            if !(0.0..=1.0).contains(&p0) {
                return Err(Error::InvalidInput(format!("mixture: p0 must lie in [0, 1], got {p0}")));
            }
            RegistryEntry {
                spec: format!(
                    "mixture:{}",
                    fmt_list(&[
                        ("p0", p0.to_string()),
                        ("k10", k10.to_string()),
                        ("k20", k20.to_string()),
                        ("kmin", kmin.to_string()),
                        ("kmax", kmax.to_string()),
                        ("np", n_p.to_string()),
                        ("nk", n_k.to_string())
                    ])
                ),
                model: Box::new(ExpMixture2 { kmin, kmax, n_p, n_k }),
                theta0: Theta0::Fixed(ParamPoint::continuous(vec![p0, k10, k20])),
                natural_prior: Prior::flat(),
                symmetric: None,
                scale: 1.0,
                oracle: None,
            }
        }
        _ => {
            return Err(Error::InvalidInput(format!("unknown model '{name}' (known: {})", MODEL_NAMES.join(", "))));
        }
    };
    p.finish()?;
    if let Theta0::Fixed(t) = &entry.theta0 {
        entry.model.param_space().check(t)?;
    }
    Ok(entry)
}

/// Rebuild `spec` with its scale parameter multiplied by `factor`; used
/// as a negative control for oracle checks.
pub fn perturb_scale(spec: &str, factor: f64) -> Result<String> {
    let entry = parse_model(spec)?;
    let (name, rest) = entry.spec.split_once(':').unwrap_or((&entry.spec, ""));
    let key = match name {
        "normal-conj" | "normal-fixed" | "normal-mean" | "normal-discrete" => "sigma",
        "normal-meanvar" => "sigma0",
        "uniform" => "L0",
        "exponential" => "lambda0",
        _ => return Err(Error::NotSupported(format!("{name} has no scale parameter to perturb"))),
    };
    let parts: Vec<String> = rest
        .split(',')
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
            if k == key {
                let v: f64 = v.parse().unwrap_or(1.0);
                // λ is an inverse scale
                let nv = if key == "lambda0" { v / factor } else { v * factor };
                format!("{k}={nv}")
            } else {
                kv.to_string()
            }
        })
        .collect();
    Ok(format!("{name}:{}", parts.join(",")))
}

/// Prior selected on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorChoice {
    Natural,
    Flat,
    /// Closed-form GPI prior solved at each N.
    Gpi,
    /// A tabulated prior read from a CSV file.
    File(String),
}

impl PriorChoice {
    pub fn parse(s: &str) -> PriorChoice {
        match s {
            "natural" => PriorChoice::Natural,
            "flat" => PriorChoice::Flat,
            "gpi" => PriorChoice::Gpi,
            path => PriorChoice::File(path.to_string()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            PriorChoice::Natural => "natural".into(),
            PriorChoice::Flat => "flat".into(),
            PriorChoice::Gpi => "gpi".into(),
            PriorChoice::File(p) => p.clone(),
        }
    }

    /// The prior to use at sample size `n`.
    pub fn resolve(&self, entry: &RegistryEntry, n: f64) -> Result<Prior> {
        match self {
            PriorChoice::Natural => Ok(entry.natural_prior.clone()),
            PriorChoice::Flat => Ok(Prior::flat()),
            PriorChoice::Gpi => match entry.symmetric {
                Some(kind) => Ok(gpi_exact_symmetric(kind, n)?.prior),
                None => Err(Error::NotSupported(format!(
                    "{} has no closed-form GPI prior; solve one with `gpi --recursive` and pass the file",
                    entry.spec
                ))),
            },
            PriorChoice::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::NotFound {
                        Error::InvalidInput(format!("prior '{path}' is neither natural, flat, gpi nor a readable file"))
                    } else {
                        Error::Io(format!("{path}: {e}"))
                    }
                })?;
                Ok(Prior::grid(gpi_from_csv(&text)?))
            }
        }
    }

    /// Analytic oracle matching this prior, if any.
    pub fn oracle(&self, entry: &RegistryEntry) -> Option<OracleKind> {
        match self {
            PriorChoice::Natural => entry.oracle,
            PriorChoice::Gpi => entry.symmetric.map(|kind| OracleKind::Gpi { kind, scale: entry.scale }),
            PriorChoice::Flat if matches!(entry.symmetric, Some(SymmetricKind::NormalMeanFlat { .. })) => entry.oracle,
            PriorChoice::Flat if matches!(entry.oracle, Some(OracleKind::DiscreteMean { .. })) => entry.oracle,
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_examples() {
        let e = parse_model("poisson:t=500,m0=6").unwrap();
        assert_eq!(e.spec, "poisson:t=500,m0=6,b=0");
        assert_eq!(e.theta0, Theta0::Fixed(ParamPoint::discrete(vec![6])));
        let e = parse_model("uniform:L0=10").unwrap();
        assert_eq!(e.symmetric, Some(SymmetricKind::UniformSupport));
        let e = parse_model("normal-conj:K=1,sigma=1,sigma_p=1").unwrap();
        assert_eq!(e.theta0, Theta0::FromPrior);
        assert!(matches!(e.oracle, Some(OracleKind::Conjugate { k: 1, n0, .. }) if n0 == 1.0));
        for name in MODEL_NAMES {
            parse_model(name).unwrap();
        }
    }

    #[test]
    fn rejects_bad_strings() {
        assert!(parse_model("gamma").is_err());
        assert!(parse_model("uniform:L=10").is_err());
        assert!(parse_model("uniform:L0=-1").is_err());
        assert!(parse_model("poisson:m0=0").is_err());
        assert!(parse_model("exponential:lambda0").is_err());
        assert!(parse_model("uniform:L0=1,L0=2").is_err());
    }

    #[test]
    fn canonical_spec_round_trips() {
        for s in ["normal-meanvar:D=2,sigma0=0.5", "mixture:p0=0.3,k10=1,k20=4", "normal-discrete:D=2,sigma=3.87"] {
            let a = parse_model(s).unwrap();
            let b = parse_model(&a.spec).unwrap();
            assert_eq!(a.spec, b.spec);
        }
    }

    #[test]
    fn perturbation_changes_only_the_scale() {
        assert_eq!(perturb_scale("normal-mean:sigma=1", 2.0).unwrap(), "normal-mean:D=1,sigma=2,mu0=0");
        assert_eq!(perturb_scale("exponential:lambda0=2", 2.0).unwrap(), "exponential:lambda0=1");
        assert!(perturb_scale("poisson", 2.0).is_err());
    }

    #[test]
    fn prior_choices() {
        let e = parse_model("exponential:lambda0=2").unwrap();
        let p = PriorChoice::parse("gpi").resolve(&e, 10.0).unwrap();
        assert!((p.log_c - SymmetricKind::Exponential.log_c(10.0)).abs() < 1e-15);
        let e = parse_model("poisson").unwrap();
        assert!(PriorChoice::Gpi.resolve(&e, 1.0).is_err());
        assert!(matches!(PriorChoice::parse("/no/such/file.csv").resolve(&e, 1.0), Err(Error::InvalidInput(_))));
    }
}

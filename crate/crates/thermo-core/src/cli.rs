//! The `thermo` command line: sweeps, GPI solving, the model-selection
//! experiment and oracle checks.

use crate::error::{Error, Result};
use crate::gpi::{gpi_discrete_limits, gpi_recursive, gpi_to_csv, grid_points, GpiPrior, RecursiveOptions};
use crate::model::Theta0;
use crate::oracles::effective_complexity;
use crate::prior::{GridPrior, Prior};
use crate::registry::{parse_model, perturb_scale, PriorChoice, RegistryEntry};
use crate::selection::{lindley_crossing, lindley_threshold, run_fig6, ExperimentConfig, LindleyMode, PosteriorMatrix, PriorMode};
use crate::space::ParamPoint;
use crate::thermo::{disorder_average, Route, ThermoOptions, ThermoReport};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "thermo", version, about = "Thermodynamics of Bayesian inference: learning capacity, Gibbs entropy and GPI priors")]
pub struct Cli {
    /// Worker threads (default: THERMO_JOBS or all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Disorder-averaged F, U, C and S over a sample-size sweep.
    Thermo(ThermoArgs),
    /// Solve GPI priors (closed form, recursive or lattice limits).
    Gpi(GpiArgs),
    /// Posterior model probabilities and Lindley–Bartlett thresholds.
    Select(SelectArgs),
    /// Compare Monte Carlo thermodynamics with an analytic oracle.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Auto,
    Statistic,
    Exact,
    Loo,
    Prefix,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Route {
        match r {
            RouteArg::Auto => Route::Auto,
            RouteArg::Statistic => Route::Statistic,
            RouteArg::Exact => Route::ExactSampler,
            RouteArg::Loo => Route::PredictiveLoo,
            RouteArg::Prefix => Route::Prefix,
        }
    }
}

#[derive(Args, Debug)]
pub struct Common {
    /// JSON run configuration; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Registry string, e.g. `poisson:t=500,m0=6`.
    #[arg(long)]
    pub model: Option<String>,
    /// natural, flat, gpi, or a prior CSV file.
    #[arg(long)]
    pub prior: Option<String>,
    /// Sample sizes: `a..b`, `a..b:step` or a comma-separated list.
    #[arg(long = "N")]
    pub n: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ThermoArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "auto")]
    pub route: RouteArg,
}

#[derive(Args, Debug)]
pub struct GpiArgs {
    #[command(flatten)]
    pub common: Common,
    /// Entropy-flattening iteration on a grid.
    #[arg(long)]
    pub recursive: bool,
    /// Grid for the recursive solver: `m=1..200` (lattice) or `x=a..b:n`.
    #[arg(long)]
    pub grid: Option<String>,
    /// The solver runs on a grid this many times longer than the reported one.
    #[arg(long, default_value_t = 2.0)]
    pub pad: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    pub damping: f64,
    /// Fixed stopping tolerance on max|S| (default: 3 pooled stderr).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Two-branch lattice prior at θ0 instead of a continuum solution.
    #[arg(long)]
    pub lattice: bool,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// gpi, normalized, informative or all.
    #[arg(long, default_value = "all")]
    pub mode: String,
    #[arg(long = "N")]
    pub n: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lindley–Bartlett threshold table instead of the posterior matrix.
    #[arg(long)]
    pub lindley: bool,
    #[arg(long = "L", default_value_t = 100.0)]
    pub l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Scan step in units of δμ for the brute-force crossing.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Multiply the data-generating scale by this factor (negative control).
    #[arg(long)]
    pub perturb_sigma: Option<f64>,
    /// Largest |z| accepted.
    #[arg(long, default_value_t = 4.0)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub route: RouteArg,
}

/// JSON run configuration shared by `thermo`, `gpi` and `oracle-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    /// Registry name, optionally with inline `key=value` parameters.
    pub model: String,
    /// Extra model parameters merged into `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<BTreeMap<String, serde_json::Value>>,
    #[serde(default = "default_prior")]
    pub prior: String,
    /// Overrides the true parameter carried by the model string (a number
    /// or an array).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<serde_json::Value>,
    #[serde(rename = "Nlist", alias = "N", default)]
    pub n: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub format: Format,
}

fn default_prior() -> String {
    "natural".into()
}

fn default_replicates() -> usize {
    1000
}

/// Parse `a..b`, `a..b:step` or `a,b,c` into a strictly increasing list.
pub fn parse_sizes(s: &str) -> Result<Vec<f64>> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad sample size '{v}' in '{s}'")));
    let out = if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, st)) => (num(b)?, num(st)?),
            None => (num(rest)?, 1.0),
        };
        let a = num(a)?;
        if !(step > 0.0) {
            return Err(Error::InvalidInput(format!("range step must be positive in '{s}'")));
        }
        let count = ((b - a) / step + 1e-9).floor();
        if !(count >= 0.0) || count > 1e7 {
            return Err(Error::InvalidInput(format!("empty or oversized range '{s}'")));
        }
        (0..=count as usize).map(|i| a + step * i as f64).collect()
    } else {
        s.split(',').filter(|v| !v.trim().is_empty()).map(num).collect::<Result<Vec<_>>>()?
    };
    check_sizes(&out)?;
    Ok(out)
}

fn check_sizes(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput("the N list is empty".into()));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("the N list must be strictly increasing".into()));
    }
    if v.iter().any(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(Error::InvalidInput("sample sizes must be positive".into()));
    }
    Ok(())
}

fn resolve_config(c: &Common, subcommand: &str) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => serde_json::from_str::<RunConfig>(&std::fs::read_to_string(p)?)?,
        None => RunConfig { model: String::new(), prior: default_prior(), replicates: default_replicates(), ..Default::default() },
    };
    cfg.subcommand = Some(subcommand.into());
    if let Some(m) = &c.model {
        cfg.model = m.clone();
    }
    if cfg.model.is_empty() {
        return Err(Error::InvalidInput("--model (or a config file) is required".into()));
    }
    if let Some(p) = &c.prior {
        cfg.prior = p.clone();
    }
    if let Some(n) = &c.n {
        cfg.n = parse_sizes(n)?;
    }
    if let Some(r) = c.replicates {
        cfg.replicates = r;
    }
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    if let Some(o) = &c.out {
        cfg.output = Some(o.display().to_string());
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidInput("replicates must be positive".into()));
    }
    Ok(cfg)
}

fn model_string(cfg: &RunConfig) -> Result<String> {
    let Some(params) = &cfg.params else {
        return Ok(cfg.model.clone());
    };
    let mut parts = Vec::new();
    for (k, v) in params {
        let v = match v {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Bool(b) => (*b as u8).to_string(),
            other => return Err(Error::InvalidInput(format!("parameter '{k}' must be a number or string, got {other}"))),
        };
        parts.push(format!("{k}={v}"));
    }
    let sep = if cfg.model.contains(':') { "," } else { ":" };
    Ok(format!("{}{sep}{}", cfg.model, parts.join(",")))
}

fn theta0_values(v: &serde_json::Value) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("theta0 must be a number or an array of numbers, got {v}"));
    match v {
        serde_json::Value::Number(n) => Ok(vec![n.as_f64().ok_or_else(bad)?]),
        serde_json::Value::Array(a) => a.iter().map(|x| x.as_f64().ok_or_else(bad)).collect(),
        _ => Err(bad()),
    }
}

fn entry_for(cfg: &RunConfig) -> Result<RegistryEntry> {
    let mut entry = parse_model(&model_string(cfg)?)?;
    if let Some(t) = &cfg.theta0 {
        let t = theta0_values(t)?;
        let space = entry.model.param_space();
        let p = if space.continuous.is_empty() && !space.discrete.is_empty() {
            if t.iter().any(|v| v.fract() != 0.0) {
                return Err(Error::InvalidInput("lattice θ0 must be integers".into()));
            }
            ParamPoint::discrete(t.iter().map(|&v| v as i64).collect())
        } else {
            ParamPoint::continuous(t)
        };
        space.check(&p)?;
        entry.theta0 = Theta0::Fixed(p);
    }
    Ok(entry)
}

/// Replace the model string by its canonical form (parameters folded in).
fn canonicalize(cfg: &mut RunConfig, entry: &RegistryEntry) {
    cfg.model = entry.spec.clone();
    cfg.params = None;
}

fn require_seed(cfg: &RunConfig) -> Result<u64> {
    cfg.seed.ok_or_else(|| Error::InvalidInput("--seed is required for stochastic runs".into()))
}

/// Rendered output of one subcommand.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Extra `# key: value` lines.
    notes: Vec<String>,
}

impl Table {
    fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    fn render(&self, format: Format, config: &serde_json::Value) -> Result<String> {
        match format {
            Format::Csv => {
                let mut s = format!("# thermo {VERSION}\n# config: {}\n", serde_json::to_string(config)?);
                for n in &self.notes {
                    s.push_str(&format!("# {n}\n"));
                }
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header)?;
                for r in &self.rows {
                    w.write_record(r)?;
                }
                s.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))?);
                Ok(s)
            }
            Format::Json => {
                let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
                    .rows
                    .iter()
                    .map(|r| {
                        self.header
                            .iter()
                            .zip(r)
                            .map(|(h, v)| {
                                let val = match v.parse::<f64>() {
                                    Ok(x) if x.is_finite() => json!(x),
                                    _ => json!(v),
                                };
                                (h.clone(), val)
                            })
                            .collect()
                    })
                    .collect();
                let doc = json!({"tool": "thermo", "version": VERSION, "config": config, "notes": self.notes, "rows": rows});
                Ok(serde_json::to_string_pretty(&doc)? + "\n")
            }
        }
    }
}

fn emit(text: &str, out: Option<&str>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_thermo(a: &ThermoArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut cfg = resolve_config(&a.common, "thermo")?;
    check_sizes(&cfg.n)?;
    let seed = require_seed(&cfg)?;
    let entry = entry_for(&cfg)?;
    canonicalize(&mut cfg, &entry);
    let choice = PriorChoice::parse(&cfg.prior);
    let opts = ThermoOptions { replicates: cfg.replicates, seed, route: a.route.into(), ..Default::default() };
    let mut t = Table::new(&ThermoReport::CSV_HEADER);
    t.header.push("route".into());
    for &n in &cfg.n {
        let prior = choice.resolve(&entry, n)?;
        let r = disorder_average(entry.model.as_ref(), &prior, &entry.theta0, n, &opts)
            .map_err(|e| annotate(e, &format!("thermodynamics at N={n}")))?;
        let mut rec = r.csv_record();
        rec.push(format!("{:?}", r.route));
        t.rows.push(rec);
    }
    let mut config = serde_json::to_value(&cfg)?;
    config["route"] = json!(format!("{:?}", a.route).to_lowercase());
    emit(&t.render(cfg.format, &config)?, cfg.output.as_deref(), stdout)?;
    Ok(0)
}

fn annotate(e: Error, what: &str) -> Error {
    match e {
        Error::Divergence(m) => Error::Divergence(format!("{what}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{what}: {m}")),
        Error::NotDefined(m) => Error::NotDefined(format!("{what}: {m}")),
        other => other,
    }
}

fn fmt_f(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// `m=1..200` or `x=0.1..10:50` into (name, axis, discrete).
fn parse_grid(s: &str) -> Result<(String, Vec<f64>, bool)> {
    let (name, range) = s.split_once('=').ok_or_else(|| Error::InvalidInput(format!("grid '{s}' must look like m=1..200")))?;
    let (a, rest) = range.split_once("..").ok_or_else(|| Error::InvalidInput(format!("grid '{s}' needs a range a..b")))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad grid bound '{v}'")));
    match rest.split_once(':') {
        None => {
            let (a, b) = (num(a)?, num(rest)?);
            if a.fract() != 0.0 || b.fract() != 0.0 || b < a {
                return Err(Error::InvalidInput(format!("lattice grid '{s}' needs integer bounds a ≤ b")));
            }
            Ok((name.trim().into(), (a as i64..=b as i64).map(|m| m as f64).collect(), true))
        }
        Some((b, n)) => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| Error::InvalidInput(format!("bad point count in '{s}'")))?;
            if n < 2 || !(b > a) {
                return Err(Error::InvalidInput(format!("grid '{s}' needs a < b and at least 2 points")));
            }
            Ok((name.trim().into(), (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(), false))
        }
    }
}

fn cmd_gpi(a: &GpiArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut cfg = resolve_config(&a.common, "gpi")?;
    let entry = entry_for(&cfg)?;
    canonicalize(&mut cfg, &entry);
    let mut config = serde_json::to_value(&cfg)?;
    if a.recursive {
        let grid = a.grid.as_deref().ok_or_else(|| Error::InvalidInput("--recursive needs --grid".into()))?;
        let (name, axis, discrete) = parse_grid(grid)?;
        // Poisson is indexed by exposure; everything else needs one N
        let n = match (cfg.n.as_slice(), entry.spec.starts_with("poisson")) {
            ([n], _) => *n,
            ([], true) => entry.spec.split(['=', ',']).nth(1).and_then(|t| t.parse().ok()).unwrap_or(1.0),
            _ => return Err(Error::InvalidInput("the recursive solver takes exactly one --N".into())),
        };
        let seed = cfg.seed.unwrap_or(1);
        if !(a.pad >= 1.0) {
            return Err(Error::InvalidInput("--pad must be at least 1".into()));
        }
        let report = axis.len();
        let padded: Vec<f64> = if a.pad > 1.0 {
            let (lo, hi) = (axis[0], axis[report - 1]);
            let step = if report > 1 { axis[1] - axis[0] } else { 1.0 };
            let far = lo + a.pad * (hi - lo + step) - step;
            let extra = ((far - hi) / step).round() as usize;
            axis.iter().cloned().chain((1..=extra).map(|i| hi + step * i as f64)).collect()
        } else {
            axis.clone()
        };
        let start = GridPrior::new(vec![padded.clone()], vec![0.0; padded.len()], discrete)?;
        let start = GridPrior {
            log_w: grid_points(&start)
                .iter()
                .map(|p| entry.natural_prior.log_density(p) - entry.natural_prior.log_c)
                .collect(),
            ..start
        };
        let opts = RecursiveOptions {
            replicates: cfg.replicates,
            seed,
            max_iter: a.max_iter,
            stop_tol: a.tol,
            damping: a.damping,
            report: Some(report),
            route: Route::Auto,
        };
        let solved = gpi_recursive(entry.model.as_ref(), &start, n, &opts)?;
        // report only the requested window
        let cut = |g: &GpiPrior| -> Result<GpiPrior> {
            let grid = match &g.prior.shape {
                crate::prior::PriorShape::Grid(gr) => gr.clone(),
                _ => unreachable!("recursive solutions are tabulated"),
            };
            let out = GridPrior::new(vec![grid.axes[0][..report].to_vec()], grid.log_w[..report].to_vec(), grid.discrete)?;
            Ok(GpiPrior { prior: Prior::grid(out).tagged(g.n), log_correction: g.log_correction[..report].to_vec(), ..g.clone() })
        };
        let shown = cut(&solved)?;
        config["grid"] = json!(grid);
        config["pad"] = json!(a.pad);
        config["damping"] = json!(a.damping);
        config["maxIter"] = json!(a.max_iter);
        let mut text = format!("# thermo {VERSION}\n# config: {}\n", serde_json::to_string(&config)?);
        text.push_str(&format!("# converged: {}\n# iterations: {}\n", solved.converged, solved.iterations));
        text.push_str(&gpi_to_csv(&shown, &[name])?);
        if cfg.format == Format::Json {
            let doc = json!({"tool": "thermo", "version": VERSION, "config": config, "prior": shown, "axis": axis, "logw": match &shown.prior.shape {
                crate::prior::PriorShape::Grid(g) => g.log_w.clone(),
                _ => Vec::new(),
            }});
            text = serde_json::to_string_pretty(&doc)? + "\n";
        }
        emit(&text, cfg.output.as_deref(), stdout)?;
        return Ok(0);
    }
    if cfg.n.is_empty() {
        return Err(Error::InvalidInput("--N is required".into()));
    }
    check_sizes(&cfg.n)?;
    if a.lattice {
        let theta = match &entry.theta0 {
            Theta0::Fixed(t) => t.clone(),
            Theta0::FromPrior => return Err(Error::InvalidInput("lattice limits need a fixed θ0".into())),
        };
        let mut t = Table::new(&["N", "logw", "branches", "mixed"]);
        for &n in &cfg.n {
            let l = gpi_discrete_limits(entry.model.as_ref(), &theta, n, 1.0)?;
            let b: Vec<String> = l.branches.iter().map(|b| format!("{b:?}").to_lowercase()).collect();
            t.rows.push(vec![fmt_f(n), fmt_f(l.log_w), b.join(";"), l.mixed.to_string()]);
        }
        emit(&t.render(cfg.format, &config)?, cfg.output.as_deref(), stdout)?;
        return Ok(0);
    }
    let kind = entry.symmetric.ok_or_else(|| {
        Error::NotSupported(format!("{} has no closed-form GPI prior; use --recursive with --grid", entry.spec))
    })?;
    let mut t = Table::new(&["N", "logC", "Keff", "K", "status"]);
    for &n in &cfg.n {
        let keff = effective_complexity(kind, n);
        let lc = kind.log_c(n);
        let status = if keff.is_finite() { "ok" } else { "divergent" };
        t.rows.push(vec![fmt_f(n), fmt_f(lc), fmt_f(keff), kind.param_count().to_string(), status.into()]);
    }
    if t.rows.iter().any(|r| r[4] == "divergent") {
        t.notes.push("warning: effective complexity is infinite where status=divergent (improper posterior)".into());
    }
    emit(&t.render(cfg.format, &config)?, cfg.output.as_deref(), stdout)?;
    Ok(0)
}

fn matrix_rows(m: &PosteriorMatrix, t: &mut Table) {
    t.rows.extend(m.records());
}

fn cmd_select(a: &SelectArgs, stdout: &mut dyn Write) -> Result<i32> {
    let format = a.format.unwrap_or_default();
    let out = a.out.as_ref().map(|p| p.display().to_string());
    if a.lindley {
        let sizes = parse_sizes(a.n.as_deref().unwrap_or("100"))?;
        let config = json!({"subcommand": "select", "lindley": true, "L": a.l, "sigma": a.sigma, "N": sizes, "step": a.step});
        let mut t = Table::new(&["mode", "L", "sigma", "N", "deltaMu", "predicted", "crossing", "relErr"]);
        for &n in &sizes {
            if n.fract() != 0.0 {
                return Err(Error::InvalidInput("the Lindley scan needs integer N".into()));
            }
            for (mode, name) in [(LindleyMode::Gpi, "gpi"), (LindleyMode::Normalized, "normalized")] {
                let dmu = a.sigma / n.sqrt();
                let (pred, cross) = match lindley_threshold(a.l, a.sigma, n, mode) {
                    Ok(p) => (p, lindley_crossing(a.l, a.sigma, n as usize, mode, a.step, (4.0 * p).max(10.0))?),
                    Err(Error::NotDefined(_)) => (f64::NAN, f64::NAN),
                    Err(e) => return Err(e),
                };
                t.rows.push(vec![
                    name.into(),
                    fmt_f(a.l),
                    fmt_f(a.sigma),
                    fmt_f(n),
                    fmt_f(dmu),
                    fmt_f(pred),
                    fmt_f(cross),
                    fmt_f((cross - pred).abs() / pred),
                ]);
            }
        }
        t.notes.push("thresholds in units of deltaMu = sigma/sqrt(N)".into());
        emit(&t.render(format, &config)?, out.as_deref(), stdout)?;
        return Ok(0);
    }
    let mut base = match &a.config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = &a.n {
        let v = parse_sizes(n)?;
        if v.len() != 1 || v[0].fract() != 0.0 {
            return Err(Error::InvalidInput("select takes one integer --N".into()));
        }
        base.n = v[0] as usize;
    }
    if let Some(r) = a.replicates {
        base.replicates = r;
    }
    if let Some(s) = a.seed {
        base.seed = s;
    }
    let modes = if a.config.is_some() && a.mode == "all" {
        vec![base.mode]
    } else if a.mode == "all" {
        vec![PriorMode::Gpi, PriorMode::NormalizedJeffreys, PriorMode::InformativeFixedSupport]
    } else {
        vec![PriorMode::parse(&a.mode)?]
    };
    let mut t = Table::new(&PosteriorMatrix::CSV_HEADER);
    for mode in &modes {
        let cfg = ExperimentConfig { mode: *mode, ..base.clone() };
        matrix_rows(&run_fig6(&cfg)?, &mut t);
    }
    let config = json!({"subcommand": "select", "experiment": base, "modes": modes.iter().map(|m| m.name()).collect::<Vec<_>>()});
    emit(&t.render(format, &config)?, out.as_deref(), stdout)?;
    Ok(0)
}

fn z_score(mc: f64, se: f64, exact: f64) -> f64 {
    let d = mc - exact;
    if se > 0.0 {
        d / se
    } else if d.abs() <= 1e-9 * exact.abs().max(1.0) {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

fn cmd_oracle(a: &OracleArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut cfg = resolve_config(&a.common, "oracle-check")?;
    check_sizes(&cfg.n)?;
    let seed = require_seed(&cfg)?;
    let entry = entry_for(&cfg)?;
    canonicalize(&mut cfg, &entry);
    let choice = PriorChoice::parse(&cfg.prior);
    let oracle = choice
        .oracle(&entry)
        .ok_or_else(|| Error::NotSupported(format!("no analytic oracle for {} with prior {}", entry.spec, choice.name())))?;
    let mc_entry = match a.perturb_sigma {
        Some(f) => {
            if !(f > 0.0) {
                return Err(Error::InvalidInput("--perturb-sigma must be positive".into()));
            }
            entry_for(&RunConfig { model: perturb_scale(&entry.spec, f)?, params: None, ..cfg.clone() })?
        }
        None => entry_for(&cfg)?,
    };
    let opts = ThermoOptions { replicates: cfg.replicates, seed, route: a.route.into(), ..Default::default() };
    let mut t = Table::new(&["oracle", "N", "quantity", "analytic", "monteCarlo", "stderr", "z", "pass"]);
    let mut worst = 0.0f64;
    for &n in &cfg.n {
        let prior = choice.resolve(&entry, n)?;
        let r = disorder_average(mc_entry.model.as_ref(), &prior, &mc_entry.theta0, n, &opts)
            .map_err(|e| annotate(e, &format!("oracle check at N={n}")))?;
        let ex = oracle.thermo(n);
        for (q, mc, se, exact) in [
            ("F", r.fbar, r.fse, ex.fbar),
            ("U", r.ubar, r.use_, ex.ubar),
            ("C", r.cbar, r.cse, ex.cbar),
            ("S", r.sbar, r.sse, ex.sbar),
        ] {
            let z = z_score(mc, se, exact);
            worst = worst.max(z.abs());
            t.rows.push(vec![
                oracle.label(),
                fmt_f(n),
                q.into(),
                fmt_f(exact),
                fmt_f(mc),
                fmt_f(se),
                fmt_f(z),
                (z.abs() <= a.threshold).to_string(),
            ]);
        }
    }
    let pass = worst <= a.threshold;
    t.notes.push(format!("max |z| = {} (threshold {}): {}", fmt_f(worst), a.threshold, if pass { "PASS" } else { "FAIL" }));
    let mut config = serde_json::to_value(&cfg)?;
    config["perturbSigma"] = json!(a.perturb_sigma);
    config["threshold"] = json!(a.threshold);
    emit(&t.render(cfg.format, &config)?, cfg.output.as_deref(), stdout)?;
    if pass {
        Ok(0)
    } else {
        Err(Error::Numeric(format!("oracle check failed: max |z| = {} exceeds {}", fmt_f(worst), a.threshold)))
    }
}

fn configure_jobs(jobs: Option<usize>) -> Result<()> {
    let jobs = match jobs {
        Some(j) => Some(j),
        None => match std::env::var("THERMO_JOBS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| Error::InvalidInput(format!("THERMO_JOBS='{v}' is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::InvalidInput("--jobs must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(())
}

/// Run the CLI; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(stdout, "{}", e.render()) } else { write!(stderr, "{}", e.render()) };
            return code;
        }
    };
    let res = configure_jobs(cli.jobs).and_then(|_| match &cli.command {
        Command::Thermo(a) => cmd_thermo(a, stdout),
        Command::Gpi(a) => cmd_gpi(a, stdout),
        Command::Select(a) => cmd_select(a, stdout),
        Command::OracleCheck(a) => cmd_oracle(a, stdout),
    });
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "thermo: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("thermo").chain(args.iter().cloned()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn size_lists() {
        assert_eq!(parse_sizes("2..5").unwrap(), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(parse_sizes("1..2:0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_sizes("5,20,100").unwrap(), vec![5.0, 20.0, 100.0]);
        assert!(parse_sizes("5,3").is_err());
        assert!(parse_sizes("").is_err());
        assert!(parse_sizes("3..1").is_err());
    }

    #[test]
    fn grids() {
        let (n, a, d) = parse_grid("m=1..4").unwrap();
        assert_eq!((n.as_str(), a, d), ("m", vec![1.0, 2.0, 3.0, 4.0], true));
        let (_, a, d) = parse_grid("x=0..1:3").unwrap();
        assert_eq!((a, d), (vec![0.0, 0.5, 1.0], false));
        assert!(parse_grid("m=1.5..3").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_str(&["thermo", "--model", "gamma", "--N", "2", "--seed", "1"]).0, 2);
        assert_eq!(run_str(&["bogus"]).0, 2);
        assert_eq!(run_str(&["thermo", "--model", "exponential", "--N", "2"]).0, 2);
    }

    #[test]
    fn gpi_closed_form_reports_divergence_with_exit_0() {
        let (code, out, _) = run_str(&["gpi", "--model", "normal-meanvar:D=1", "--N", "1,2"]);
        assert_eq!(code, 0);
        assert!(out.contains("1,-inf,inf,2,divergent"), "{out}");
    }

    #[test]
    fn output_is_deterministic() {
        let args = ["thermo", "--model", "uniform:L0=10", "--N", "2..4", "--replicates", "200", "--seed", "3"];
        let (c1, a, _) = run_str(&args);
        let (c2, b, _) = run_str(&args);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(a, b);
        assert!(a.starts_with("# thermo "));
    }
}

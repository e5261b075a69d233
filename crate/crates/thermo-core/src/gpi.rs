//! GPI priors: scaled Jeffreys, exact symmetric solutions, the recursive
//! entropy-flattening solver, lattice limits and model counting.

use crate::error::{Error, Result};
use crate::evidence::{determinant, fisher_information, statistical_resolution};
use crate::model::{Model, Theta0};
use crate::oracles::{effective_complexity, SymmetricKind};
use crate::prior::{GridPrior, Prior, PriorShape};
use crate::space::ParamPoint;
use crate::special::{log_normal_interval, log_sum_exp};
use crate::thermo::{disorder_average, Route, ThermoOptions};
use crate::zoo::NormalMeanVar;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// log ρ = (K/2) log(N/2π) + ½ log det I(θ).
pub fn log_scaled_jeffreys(model: &dyn Model, theta: &ParamPoint, n: f64) -> Result<f64> {
    let k = model.param_count();
    if k == 0 {
        return Ok(0.0);
    }
    let i = fisher_information(model, theta)?;
    let det = determinant(&i);
    if !(det > 0.0) {
        return Err(Error::NotDefined("Fisher information is singular".into()));
    }
    Ok(0.5 * k as f64 * (n / (2.0 * PI)).ln() + 0.5 * det.ln())
}

/// ρ(θ; N) = (N/2π)^{K/2} √det I(θ).
pub fn scaled_jeffreys(model: &dyn Model, theta: &ParamPoint, n: f64) -> Result<f64> {
    log_scaled_jeffreys(model, theta, n).map(f64::exp)
}

/// Large-N GPI prior ρ·e^{−K}.
pub fn gpi_asymptotic(model: &dyn Model, theta: &ParamPoint, n: f64) -> Result<f64> {
    Ok((log_scaled_jeffreys(model, theta, n)? - model.param_count() as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GpiBase {
    /// Closed-form symmetric solution.
    Symmetric(SymmetricKind),
    /// Pointwise-corrected tabulated prior.
    Tabulated,
    /// Lattice two-branch prior.
    LatticeLimits,
}

/// A solved GPI prior and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpiPrior {
    pub base: GpiBase,
    /// Usable prior density.
    #[serde(skip)]
    pub prior: Prior,
    #[serde(rename = "N")]
    pub n: f64,
    /// 𝒦(N) for closed-form solutions.
    pub keff: Option<f64>,
    /// log w − log ϖ0 on the grid (tabulated solutions).
    pub log_correction: Vec<f64>,
    /// max |S̄| before each update.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warning: Option<String>,
    /// Smoothing is never applied; kept as output metadata.
    pub smoothed: bool,
}

impl GpiPrior {
    pub fn final_residual(&self) -> Option<f64> {
        self.trace.iter().cloned().fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.min(v))))
    }
}

/// Prior shape fixed by the family's symmetry.
pub fn symmetric_shape(kind: SymmetricKind) -> Prior {
    match kind {
        SymmetricKind::NormalMeanFlat { .. } => Prior::flat(),
        SymmetricKind::NormalMeanVar { d } => Prior::power(NormalMeanVar { d }.shape_exponents(), 0.0),
        SymmetricKind::Exponential | SymmetricKind::UniformSupport => Prior::power(vec![-1.0], 0.0),
    }
}

/// Closed-form GPI prior w = c(N)·shape(θ).
pub fn gpi_exact_symmetric(kind: SymmetricKind, n: f64) -> Result<GpiPrior> {
    if !(n >= 1.0) {
        return Err(Error::InvalidInput(format!("sample size {n} must be at least 1")));
    }
    let lc = kind.log_c(n);
    if !lc.is_finite() {
        return Err(Error::Divergence(format!(
            "{} has an improper posterior at N={n}: effective complexity is infinite",
            kind.name()
        )));
    }
    Ok(GpiPrior {
        base: GpiBase::Symmetric(kind),
        prior: symmetric_shape(kind).with_log_c(lc).tagged(n),
        n,
        keff: Some(effective_complexity(kind, n)),
        log_correction: Vec::new(),
        trace: Vec::new(),
        iterations: 0,
        converged: true,
        warning: None,
        smoothed: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursiveOptions {
    pub replicates: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when max|S̄| falls below this; default 3× pooled stderr with a
    /// floor for deterministic routes.
    pub stop_tol: Option<f64>,
    pub damping: f64,
    /// Only the first `report` grid points enter the residual (the rest pad
    /// the grid against edge effects).
    pub report: Option<usize>,
    pub route: Route,
}

impl Default for RecursiveOptions {
    fn default() -> Self {
        RecursiveOptions {
            replicates: 200,
            seed: 1,
            max_iter: 20,
            stop_tol: None,
            damping: 1.0,
            report: None,
            route: Route::Auto,
        }
    }
}

/// Tolerance floor when S̄ is computed without sampling noise.
pub const DETERMINISTIC_TOL: f64 = 0.01;

/// Every point of a grid, row-major.
pub fn grid_points(g: &GridPrior) -> Vec<ParamPoint> {
    let mut out = vec![Vec::new()];
    for axis in &g.axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &a in axis {
                let mut q: Vec<f64> = p.clone();
                q.push(a);
                next.push(q);
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|c| {
            if g.discrete {
                ParamPoint::discrete(c.iter().map(|v| v.round() as i64).collect())
            } else {
                ParamPoint::continuous(c)
            }
        })
        .collect()
}

/// S̄ and its stderr at every grid point under `prior`.
fn entropy_field(
    model: &dyn Model,
    prior: &Prior,
    points: &[ParamPoint],
    n: f64,
    opts: &RecursiveOptions,
) -> Result<Vec<(f64, f64)>> {
    let topts = ThermoOptions { replicates: opts.replicates, seed: opts.seed, route: opts.route, max_divergent_fraction: 0.01 };
    points
        .par_iter()
        .map(|p| disorder_average(model, prior, &Theta0::Fixed(p.clone()), n, &topts).map(|r| (r.sbar, r.sse)))
        .collect()
}

/// Iterates ϖ ← ϖ·e^{−damping·S̄} on a grid until the entropy is flat.
///
/// A step that fails to lower max|S̄| is retried from the best prior with
/// half the damping; three failures in a row end the run with a warning.
pub fn gpi_recursive(model: &dyn Model, prior0: &GridPrior, n: f64, opts: &RecursiveOptions) -> Result<GpiPrior> {
    if !(opts.damping > 0.0) {
        return Err(Error::InvalidInput("damping must be positive".into()));
    }
    let points = grid_points(prior0);
    let report = opts.report.unwrap_or(points.len()).min(points.len());
    if report == 0 {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let mut current = prior0.log_w.clone();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None; // (residual, log w, S̄)
    let mut trace = Vec::new();
    let mut damping = opts.damping;
    let mut stalls = 0;
    let mut iterations = 0;
    let mut warning = None;
    let mut converged = false;
    loop {
        let prior = Prior::grid(GridPrior { axes: prior0.axes.clone(), log_w: current.clone(), discrete: prior0.discrete }).tagged(n);
        let field = entropy_field(model, &prior, &points, n, opts)?;
        let s: Vec<f64> = field.iter().map(|f| f.0).collect();
        let resid = s[..report].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let pooled = (field[..report].iter().map(|f| f.1 * f.1).sum::<f64>() / report as f64).sqrt();
        let tol = opts.stop_tol.unwrap_or((3.0 * pooled).max(if pooled == 0.0 { DETERMINISTIC_TOL } else { 0.0 }));
        trace.push(resid);
        let improved = best.as_ref().is_none_or(|b| resid < b.0);
        if improved {
            best = Some((resid, current.clone(), s));
            stalls = 0;
        } else {
            stalls += 1;
            damping *= 0.5;
        }
        if resid < tol && improved {
            converged = true;
            break;
        }
        if stalls >= 3 {
            warning = Some(format!(
                "stopped after {iterations} updates: max|S| did not improve for 3 iterations (best {:.4})",
                best.as_ref().map_or(f64::NAN, |b| b.0)
            ));
            break;
        }
        if iterations >= opts.max_iter {
            warning = Some(format!("reached {} iterations without meeting the tolerance {tol:.4}", opts.max_iter));
            break;
        }
        let (_, base, sb) = best.as_ref().expect("best is set after the first pass");
        current = base.iter().zip(sb).map(|(w, s)| w - damping * s).collect();
        iterations += 1;
    }
    let (_, log_w, _) = best.expect("at least one pass");
    let log_correction = log_w.iter().zip(&prior0.log_w).map(|(a, b)| a - b).collect();
    let grid = GridPrior { axes: prior0.axes.clone(), log_w, discrete: prior0.discrete };
    Ok(GpiPrior {
        base: GpiBase::Tabulated,
        prior: Prior::grid(grid).tagged(n),
        n,
        keff: None,
        log_correction,
        trace,
        iterations,
        converged,
        warning,
        smoothed: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LatticeBranch {
    /// Spacing finer than the resolution: continuum GPI times the cell size.
    Continuum,
    /// Spacing coarser than the resolution: unit weight per lattice point.
    Laplace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteLimit {
    pub log_w: f64,
    pub branches: Vec<LatticeBranch>,
    /// Coordinates fall in different regimes.
    pub mixed: bool,
}

/// Two-branch lattice prior at θ: per coordinate, ρᵢe^{−1}Δθⁱ when
/// Δθⁱ/δθⁱ < `threshold`, else 1.
pub fn gpi_discrete_limits(model: &dyn Model, theta: &ParamPoint, n: f64, threshold: f64) -> Result<DiscreteLimit> {
    let space = model.param_space();
    if space.discrete.is_empty() || !space.continuous.is_empty() {
        return Err(Error::InvalidInput("lattice limits need a purely discrete parameter space".into()));
    }
    let info = fisher_information(model, theta)?;
    let delta = statistical_resolution(model, theta, n)?;
    let mut log_w = 0.0;
    let mut branches = Vec::new();
    for (i, dim) in space.discrete.iter().enumerate() {
        if dim.spacing / delta[i] < threshold {
            log_w += 0.5 * (n * info[i][i] / (2.0 * PI)).ln() - 1.0 + dim.spacing.ln();
            branches.push(LatticeBranch::Continuum);
        } else {
            branches.push(LatticeBranch::Laplace);
        }
    }
    let mixed = branches.windows(2).any(|w| w[0] != w[1]);
    Ok(DiscreteLimit { log_w, branches, mixed })
}

/// Axis-aligned integration window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub continuous: Vec<(f64, f64)>,
    pub discrete: Vec<(i64, i64)>,
}

impl Region {
    fn doubled(&self) -> Region {
        Region {
            continuous: self
                .continuous
                .iter()
                .map(|&(lo, hi)| {
                    if lo > 0.0 {
                        (0.5 * lo, 2.0 * hi)
                    } else {
                        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                        (c - 2.0 * h, c + 2.0 * h)
                    }
                })
                .collect(),
            discrete: self
                .discrete
                .iter()
                .map(|&(lo, hi)| if lo >= 1 { ((lo / 2).max(1), 2 * hi) } else { (lo - (hi - lo + 1), hi + (hi - lo + 1)) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCount {
    pub m: f64,
    pub log_m: f64,
    /// The window-doubling sequence keeps growing.
    pub divergent: bool,
    pub region: Region,
}

fn log_mass_power(e: f64, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return f64::NEG_INFINITY;
    }
    if e == 0.0 {
        return (hi - lo).ln();
    }
    if lo <= 0.0 && e <= -1.0 {
        return f64::INFINITY;
    }
    if (e + 1.0).abs() < 1e-14 {
        return (hi / lo).ln().ln();
    }
    ((hi.powf(e + 1.0) - lo.max(0.0).powf(e + 1.0)) / (e + 1.0)).ln()
}

fn log_normal_mass(m: f64, s: f64, lo: f64, hi: f64) -> f64 {
    log_normal_interval((lo - m) / s, (hi - m) / s)
}

/// log ∫_region ϖ, exactly for the closed shapes, by the trapezoid rule on
/// grid nodes for tabulated priors.
fn log_mass(prior: &Prior, region: &Region) -> Result<f64> {
    let clip = |i: usize, (lo, hi): (f64, f64)| match prior.bounds.as_ref().and_then(|b| b.get(i)) {
        Some(&(a, b)) => (lo.max(a), hi.min(b)),
        None => (lo, hi),
    };
    let cont: Vec<(f64, f64)> = region.continuous.iter().enumerate().map(|(i, &r)| clip(i, r)).collect();
    let disc_count = |lo: i64, hi: i64| ((hi - lo + 1).max(0) as f64).ln();
    let v = match &prior.shape {
        PriorShape::Flat => {
            cont.iter().map(|&(a, b)| log_mass_power(0.0, a, b)).sum::<f64>()
                + region.discrete.iter().map(|&(a, b)| disc_count(a, b)).sum::<f64>()
        }
        PriorShape::Power(e) => {
            if e.len() != cont.len() {
                return Err(Error::InvalidInput("region dimension does not match the prior".into()));
            }
            e.iter().zip(&cont).map(|(&e, &(a, b))| log_mass_power(e, a, b)).sum::<f64>()
        }
        PriorShape::Normal { mean, sd } => {
            mean.iter().zip(sd).zip(&cont).map(|((&m, &s), &(a, b))| log_normal_mass(m, s, a, b)).sum::<f64>()
        }
        PriorShape::Geometric { rate } => {
            let &(lo, hi) = region.discrete.first().ok_or_else(|| Error::InvalidInput("lattice region required".into()))?;
            if hi < lo {
                f64::NEG_INFINITY
            } else if *rate == 0.0 {
                disc_count(lo, hi)
            } else {
                // Σ_{m=lo}^{hi} e^{−bm}
                -rate * lo as f64 + (-(-rate * (hi - lo + 1) as f64).exp_m1()).ln() - (-(-rate).exp_m1()).ln()
            }
        }
        PriorShape::Grid(g) => {
            let pts = grid_points(g);
            if g.discrete {
                let terms: Vec<f64> = pts
                    .iter()
                    .filter(|p| p.discrete.iter().zip(&region.discrete).all(|(&v, &(a, b))| v >= a && v <= b))
                    .map(|p| prior.log_density(p) - prior.log_c)
                    .collect();
                log_sum_exp(&terms)
            } else {
                if g.axes.len() != 1 {
                    return Err(Error::NotSupported("counting on multi-axis continuous grids".into()));
                }
                let (a, b) = cont[0];
                let xs: Vec<f64> = g.axes[0].iter().cloned().filter(|&x| x >= a && x <= b).collect();
                let terms: Vec<f64> = xs
                    .windows(2)
                    .map(|w| {
                        let la = g.log_weight(&[w[0]]);
                        let lb = g.log_weight(&[w[1]]);
                        (w[1] - w[0]).ln() + crate::special::log_add_exp(la, lb) - std::f64::consts::LN_2
                    })
                    .collect();
                log_sum_exp(&terms)
            }
        }
    };
    Ok(prior.log_c + v)
}

/// M = ∫_region w, with divergence of the window limit flagged.
pub fn count_models(prior: &Prior, region: &Region) -> Result<ModelCount> {
    let log_m = log_mass(prior, region)?;
    let mut divergent = log_m == f64::INFINITY;
    if !divergent {
        let mut r = region.clone();
        let mut seq = Vec::new();
        for _ in 0..7 {
            r = r.doubled();
            seq.push(log_mass(prior, &r)?);
        }
        let k = seq.len();
        divergent = seq[k - 1] == f64::INFINITY || seq[k - 1] - seq[k - 2] > 1e-4;
    }
    Ok(ModelCount { m: log_m.exp(), log_m, divergent, region: region.clone() })
}

/// Split GPI priors into model probabilities M_I/ΣM_J and normalized
/// parameter priors w_I/M_I.
pub fn proper_decomposition(priors: &[Prior], counts: &[ModelCount]) -> Result<(Vec<f64>, Vec<Prior>)> {
    if priors.len() != counts.len() || priors.is_empty() {
        return Err(Error::InvalidInput("one count per prior is required".into()));
    }
    if let Some(i) = counts.iter().position(|c| c.divergent || !c.log_m.is_finite()) {
        return Err(Error::NotDefined(format!(
            "family {i} has a divergent distribution count; use the unnormalized GPI evidence instead"
        )));
    }
    let logs: Vec<f64> = counts.iter().map(|c| c.log_m).collect();
    let total = log_sum_exp(&logs);
    let probs = logs.iter().map(|l| (l - total).exp()).collect();
    let normalized = priors
        .iter()
        .zip(counts)
        .map(|(p, c)| {
            let mut q = p.clone().with_log_c(p.log_c - c.log_m);
            q.proper = true;
            if q.bounds.is_none() && !c.region.continuous.is_empty() {
                q.bounds = Some(c.region.continuous.clone());
            }
            q
        })
        .collect();
    Ok((probs, normalized))
}

/// CSV with columns `theta..., logw, iteration, maxAbsS`; the trace goes in
/// a comment line so the table round-trips.
pub fn gpi_to_csv(g: &GpiPrior, names: &[String]) -> Result<String> {
    let grid = match &g.prior.shape {
        PriorShape::Grid(grid) => grid,
        _ => return Err(Error::NotSupported("only tabulated priors serialize to a grid".into())),
    };
    if names.len() != grid.axes.len() {
        return Err(Error::InvalidInput("one column name per grid axis".into()));
    }
    let mut out = String::new();
    out.push_str(&format!("# grid: {}\n", if grid.discrete { "discrete" } else { "continuous" }));
    out.push_str(&format!("# N: {}\n", g.n));
    out.push_str(&format!("# trace: {}\n", g.trace.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")));
    if let Some(w) = &g.warning {
        out.push_str(&format!("# warning: {w}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = names.to_vec();
    header.extend(["logw", "iteration", "maxAbsS"].map(String::from));
    w.write_record(&header)?;
    let resid = g.final_residual().map_or(String::from("NaN"), |v| format!("{v}"));
    for (p, lw) in grid_points(grid).iter().zip(&grid.log_w) {
        let mut row: Vec<String> = if grid.discrete {
            p.discrete.iter().map(|v| v.to_string()).collect()
        } else {
            p.continuous.iter().map(|v| format!("{v}")).collect()
        };
        row.push(format!("{}", lw + g.prior.log_c));
        row.push(g.iterations.to_string());
        row.push(resid.clone());
        w.write_record(&row)?;
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))?);
    Ok(out)
}

/// Read a prior table written by [`gpi_to_csv`] (or by hand).
pub fn gpi_from_csv(text: &str) -> Result<GridPrior> {
    let discrete = text.lines().any(|l| l.trim() == "# grid: discrete");
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    let lw_col = headers
        .iter()
        .position(|h| h == "logw")
        .ok_or_else(|| Error::Parse("prior table has no logw column".into()))?;
    if lw_col == 0 {
        return Err(Error::Parse("prior table has no parameter columns".into()));
    }
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut log_w = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        coords.push((0..lw_col).map(|i| parse(&rec[i])).collect::<Result<_>>()?);
        log_w.push(parse(&rec[lw_col])?);
    }
    let mut axes: Vec<Vec<f64>> = (0..lw_col)
        .map(|i| {
            let mut v: Vec<f64> = coords.iter().map(|c| c[i]).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup();
            v
        })
        .collect();
    let expected: usize = axes.iter().map(|a| a.len()).product();
    if expected != log_w.len() {
        return Err(Error::Parse("prior table is not a full tensor grid".into()));
    }
    // reorder rows into row-major order
    let g0 = GridPrior { axes: axes.clone(), log_w: vec![0.0; expected], discrete };
    let mut ordered = vec![f64::NAN; expected];
    let strides: Vec<usize> = {
        let mut s = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * axes[i + 1].len();
        }
        s
    };
    for (c, &lw) in coords.iter().zip(&log_w) {
        let mut idx = 0;
        for (k, v) in c.iter().enumerate() {
            let i = g0.axes[k].partition_point(|a| a < v);
            idx += i * strides[k];
        }
        ordered[idx] = lw;
    }
    if ordered.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse("prior table has duplicate rows".into()));
    }
    axes.shrink_to_fit();
    GridPrior::new(axes, ordered, discrete)
}

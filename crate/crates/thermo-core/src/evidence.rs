//! Evidence evaluation and the per-dataset thermodynamic estimators.

use crate::error::{Error, Result};
use crate::model::{EvidenceEstimate, EvidenceMethod, Model};
use crate::prior::Prior;
use crate::quad::{log_integrate, log_lattice_sum, QuadOptions};
use crate::rng::stream;
use crate::space::{AxisScale, Dataset, ParamPoint};
use rand::Rng;
use rand_distr::Distribution;
use std::cell::{Cell, RefCell};

/// −(1/N) Σ log q(x_i|θ).
pub fn cross_entropy_hat(model: &dyn Model, theta: &ParamPoint, data: &Dataset) -> Result<f64> {
    if data.dim() != model.obs_dim() {
        return Err(Error::InvalidInput(format!(
            "samples have dimension {}, model expects {}",
            data.dim(),
            model.obs_dim()
        )));
    }
    let mut s = 0.0;
    for x in data.iter() {
        let l = model.log_likelihood(x, theta);
        if l == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        s += l;
    }
    Ok(-s / data.len() as f64)
}

fn log_likelihood_sum(model: &dyn Model, theta: &ParamPoint, data: &Dataset) -> f64 {
    let mut s = 0.0;
    for x in data.iter() {
        s += model.log_likelihood(x, theta);
        if s == f64::NEG_INFINITY {
            break;
        }
    }
    s
}

/// Evidence for `data` with the requested method.
pub fn log_evidence(
    model: &dyn Model,
    prior: &Prior,
    data: &Dataset,
    method: EvidenceMethod,
    opts: &QuadOptions,
) -> Result<EvidenceEstimate> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    if data.dim() != model.obs_dim() {
        return Err(Error::InvalidInput("dataset dimension does not match the model".into()));
    }
    match method {
        EvidenceMethod::ClosedForm => match model.exact_log_evidence(prior, data) {
            Some(r) => r.map(EvidenceEstimate::closed),
            None => Err(Error::NotSupported(format!("{} has no closed-form evidence for this prior", model.id()))),
        },
        EvidenceMethod::Quadrature => {
            if let Some(r) = model.custom_log_evidence(prior, data) {
                return r;
            }
            nested_quadrature(model, prior, data, opts)
        }
        EvidenceMethod::DiscreteSum => lattice_evidence(model, prior, data, opts),
        EvidenceMethod::MonteCarlo => importance_log_evidence(model, prior, data, 200_000, 0x5eed),
    }
}

/// Closed form when the model has one, otherwise the appropriate numerical route.
pub fn log_evidence_auto(model: &dyn Model, prior: &Prior, data: &Dataset) -> Result<EvidenceEstimate> {
    if let Some(r) = model.exact_log_evidence(prior, data) {
        return r.map(EvidenceEstimate::closed);
    }
    let opts = QuadOptions::default();
    if model.param_space().continuous.is_empty() && !model.param_space().discrete.is_empty() {
        lattice_evidence(model, prior, data, &opts)
    } else {
        log_evidence(model, prior, data, EvidenceMethod::Quadrature, &opts)
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    name: String,
}

fn axes_for(model: &dyn Model, prior: &Prior) -> Vec<Axis> {
    let space = model.param_space();
    space
        .continuous
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let (mut lo, mut hi) = (d.lo, d.hi);
            if let Some(b) = prior.bounds.as_ref().and_then(|b| b.get(i)) {
                lo = lo.max(b.0);
                hi = hi.min(b.1);
            }
            let log = d.scale == AxisScale::Log;
            if log {
                Axis { lo: if lo > 0.0 { lo.ln() } else { f64::NEG_INFINITY }, hi: hi.ln(), log, name: d.name.clone() }
            } else {
                Axis { lo, hi, log, name: d.name.clone() }
            }
        })
        .collect()
}

fn nested_quadrature(model: &dyn Model, prior: &Prior, data: &Dataset, opts: &QuadOptions) -> Result<EvidenceEstimate> {
    let space = model.param_space();
    if !space.discrete.is_empty() {
        return Err(Error::NotSupported("quadrature over lattice coordinates; use the discrete sum".into()));
    }
    if space.continuous.is_empty() {
        let ll = log_likelihood_sum(model, &ParamPoint::empty(), data);
        return Ok(EvidenceEstimate { log_z: ll + prior.log_c, method: EvidenceMethod::Quadrature, error_bound: 1e-15 });
    }
    if space.continuous.len() > 3 {
        return Err(Error::NotSupported("quadrature beyond three continuous dimensions".into()));
    }
    let axes = axes_for(model, prior);
    let hint = model.param_hint(data);
    let hints: RefCell<Vec<f64>> = RefCell::new(
        axes.iter()
            .zip(&hint.continuous)
            .map(|(a, &h)| {
                let u = if a.log { h.max(1e-300).ln() } else { h };
                // keep the starting point strictly inside a truncated axis
                if a.lo.is_finite() && a.hi.is_finite() {
                    let pad = 1e-3 * (a.hi - a.lo);
                    u.clamp(a.lo + pad, a.hi - pad)
                } else {
                    u.clamp(a.lo, a.hi)
                }
            })
            .collect(),
    );
    let scales: Vec<f64> = hints.borrow().iter().zip(&axes).map(|(&h, a)| if a.log { 0.25 } else { 0.25 * h.abs().max(1.0) }).collect();
    let err = Cell::new(0.0f64);
    let logf = |u: &[f64]| -> f64 {
        let theta = ParamPoint::continuous(
            u.iter().zip(&axes).map(|(&v, a)| if a.log { v.exp() } else { v }).collect(),
        );
        if !space.contains(&theta) {
            return f64::NEG_INFINITY;
        }
        let lp = prior.log_density(&theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let jac: f64 = u.iter().zip(&axes).filter(|(_, a)| a.log).map(|(&v, _)| v).sum();
        lp + jac + log_likelihood_sum(model, &theta, data)
    };
    let mut prefix = Vec::with_capacity(axes.len());
    let v = nested_level(&logf, &axes, 0, &mut prefix, &hints, &scales, &err, opts)?;
    Ok(EvidenceEstimate { log_z: v, method: EvidenceMethod::Quadrature, error_bound: err.get().max(1e-15) })
}

#[allow(clippy::too_many_arguments)]
fn nested_level(
    logf: &dyn Fn(&[f64]) -> f64,
    axes: &[Axis],
    level: usize,
    prefix: &mut Vec<f64>,
    hints: &RefCell<Vec<f64>>,
    scales: &[f64],
    err: &Cell<f64>,
    opts: &QuadOptions,
) -> Result<f64> {
    if level == axes.len() {
        return Ok(logf(prefix));
    }
    let mut failure: Option<Error> = None;
    let hint = hints.borrow()[level];
    let res = {
        let mut f = |u: f64| -> f64 {
            if failure.is_some() {
                return f64::NEG_INFINITY;
            }
            prefix.push(u);
            let r = nested_level(logf, axes, level + 1, prefix, hints, scales, err, opts);
            prefix.pop();
            match r {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    f64::NEG_INFINITY
                }
            }
        };
        log_integrate(&mut f, axes[level].lo, axes[level].hi, hint, scales[level], opts)
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let res = res.map_err(|e| match e {
        Error::Divergence(m) => Error::Divergence(format!("along {}: {m}", axes[level].name)),
        other => other,
    })?;
    if res.log_value > f64::NEG_INFINITY {
        hints.borrow_mut()[level] = res.peak;
    }
    err.set(err.get() + res.rel_err / axes.len() as f64);
    Ok(res.log_value)
}

fn lattice_evidence(model: &dyn Model, prior: &Prior, data: &Dataset, opts: &QuadOptions) -> Result<EvidenceEstimate> {
    let space = model.param_space();
    if !space.continuous.is_empty() || space.discrete.is_empty() {
        return Err(Error::NotSupported("discrete sum needs a purely lattice parameter space".into()));
    }
    if space.discrete.len() > 3 {
        return Err(Error::NotSupported("lattice sums beyond three dimensions".into()));
    }
    let hint = model.param_hint(data);
    let mut err = 0.0;
    let mut point = hint.discrete.clone();
    let v = lattice_level(model, prior, data, &space.discrete, 0, &mut point, &hint.discrete, opts.tail_nats, &mut err)?;
    Ok(EvidenceEstimate { log_z: v, method: EvidenceMethod::DiscreteSum, error_bound: err.max(1e-15) })
}

#[allow(clippy::too_many_arguments)]
fn lattice_level(
    model: &dyn Model,
    prior: &Prior,
    data: &Dataset,
    dims: &[crate::space::DiscreteDim],
    level: usize,
    point: &mut Vec<i64>,
    hint: &[i64],
    tail: f64,
    err: &mut f64,
) -> Result<f64> {
    if level == dims.len() {
        let p = ParamPoint::discrete(point.clone());
        let lp = prior.log_density(&p);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        return Ok(lp + log_likelihood_sum(model, &p, data));
    }
    let mut failure = None;
    let mut inner_err = 0.0;
    let (v, e) = {
        let mut f = |m: i64| -> f64 {
            point[level] = m;
            match lattice_level(model, prior, data, dims, level + 1, point, hint, tail, &mut inner_err) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    f64::NEG_INFINITY
                }
            }
        };
        log_lattice_sum(&mut f, dims[level].lo, dims[level].hi, hint[level], tail)?
    };
    if let Some(e) = failure {
        return Err(e);
    }
    *err += e + inner_err;
    Ok(v)
}

/// Coordinate-ascent mode search in transformed coordinates.
fn find_mode(logf: &dyn Fn(&[f64]) -> f64, start: &[f64]) -> Vec<f64> {
    let mut u = start.to_vec();
    let mut step = vec![0.25; u.len()];
    let mut best = logf(&u);
    for _ in 0..2000 {
        let mut improved = false;
        for i in 0..u.len() {
            for dir in [1.0, -1.0] {
                let mut c = u.clone();
                c[i] += dir * step[i];
                let v = logf(&c);
                if v > best {
                    best = v;
                    u = c;
                    step[i] *= 1.5;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
            if step.iter().all(|&s| s < 1e-7) {
                break;
            }
        }
    }
    u
}

fn hessian(logf: &dyn Fn(&[f64]) -> f64, u: &[f64], h: f64) -> Vec<Vec<f64>> {
    let k = u.len();
    let f0 = logf(u);
    let mut hm = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let e = |di: f64, dj: f64| {
                let mut c = u.to_vec();
                c[i] += di;
                c[j] += dj;
                logf(&c)
            };
            let v = if i == j {
                (e(h, 0.0) - 2.0 * f0 + e(-h, 0.0)) / (h * h)
            } else {
                (e(h, h) - e(h, -h) - e(-h, h) + e(-h, -h)) / (4.0 * h * h)
            };
            hm[i][j] = v;
            hm[j][i] = v;
        }
    }
    hm
}

/// Inverse of a small symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let l = cholesky(a)?;
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k][i] * inv[k][col];
            }
            inv[i][col] = s / l[i][i];
        }
    }
    Some(inv)
}

pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Importance-sampling evidence with a Student-t proposal at the posterior
/// mode (and its mirror image when the model has a label symmetry).
pub fn importance_log_evidence(
    model: &dyn Model,
    prior: &Prior,
    data: &Dataset,
    draws: usize,
    seed: u64,
) -> Result<EvidenceEstimate> {
    let space = model.param_space();
    if !space.discrete.is_empty() || space.continuous.is_empty() {
        return Err(Error::NotSupported("importance sampling needs continuous parameters".into()));
    }
    let axes = axes_for(model, prior);
    let to_theta = |u: &[f64]| {
        ParamPoint::continuous(u.iter().zip(&axes).map(|(&v, a)| if a.log { v.exp() } else { v }).collect())
    };
    let logf = |u: &[f64]| -> f64 {
        let theta = to_theta(u);
        if !space.contains(&theta) {
            return f64::NEG_INFINITY;
        }
        let lp = prior.log_density(&theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let jac: f64 = u.iter().zip(&axes).filter(|(_, a)| a.log).map(|(&v, _)| v).sum();
        lp + jac + log_likelihood_sum(model, &theta, data)
    };
    let hint = model.param_hint(data);
    let start: Vec<f64> = hint.continuous.iter().zip(&axes).map(|(&h, a)| if a.log { h.max(1e-300).ln() } else { h }).collect();
    let mode = find_mode(&logf, &start);
    let k = mode.len();
    let mut neg_h = hessian(&logf, &mode, 1e-4);
    for row in neg_h.iter_mut() {
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
    let cov = spd_inverse(&neg_h).ok_or_else(|| Error::Numeric("posterior curvature is not positive definite".into()))?;
    // inflate for robustness
    let cov: Vec<Vec<f64>> = cov.iter().map(|r| r.iter().map(|v| v * 2.0).collect()).collect();
    let l = cholesky(&cov).ok_or_else(|| Error::Numeric("proposal covariance".into()))?;
    let log_det_l: f64 = (0..k).map(|i| l[i][i].ln()).sum();
    let nu = 5.0;
    let lt_norm = crate::special::ln_gamma((nu + k as f64) / 2.0)
        - crate::special::ln_gamma(nu / 2.0)
        - 0.5 * k as f64 * (nu * std::f64::consts::PI).ln();
    let inv_l = {
        let mut inv = vec![vec![0.0; k]; k];
        for col in 0..k {
            for i in 0..k {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for j in 0..i {
                    s -= l[i][j] * inv[j][col];
                }
                inv[i][col] = s / l[i][i];
            }
        }
        inv
    };
    let mirror_mode: Option<Vec<f64>> = model.mirror(&to_theta(&mode)).map(|p| {
        p.continuous.iter().zip(&axes).map(|(&v, a)| if a.log { v.ln() } else { v }).collect()
    });
    let centers: Vec<Vec<f64>> = match &mirror_mode {
        Some(m) if m.iter().zip(&mode).any(|(a, b)| (a - b).abs() > 1e-6) => vec![mode.clone(), m.clone()],
        _ => vec![mode.clone()],
    };
    let log_q = |u: &[f64]| -> f64 {
        let mut acc = f64::NEG_INFINITY;
        for c in &centers {
            let d: Vec<f64> = u.iter().zip(c).map(|(a, b)| a - b).collect();
            let z: Vec<f64> = (0..k).map(|i| (0..k).map(|j| inv_l[i][j] * d[j]).sum()).collect();
            let q: f64 = z.iter().map(|v| v * v).sum();
            let v = lt_norm - log_det_l - 0.5 * (nu + k as f64) * (1.0 + q / nu).ln();
            acc = crate::special::log_add_exp(acc, v);
        }
        acc - (centers.len() as f64).ln()
    };
    let mut rng = stream(seed, 0, 7);
    let mut logw = Vec::with_capacity(draws);
    for _ in 0..draws {
        let c = &centers[if centers.len() > 1 { rng.random_range(0..centers.len()) } else { 0 }];
        // multivariate t: one chi-square scale per draw
        let g: f64 = rand_distr::Gamma::new(nu / 2.0, 2.0 / nu).map_err(|e| Error::Numeric(e.to_string()))?.sample(&mut rng);
        let z: Vec<f64> = (0..k).map(|_| rand_distr::StandardNormal.sample(&mut rng)).collect::<Vec<f64>>();
        let u: Vec<f64> = (0..k).map(|i| c[i] + (0..=i).map(|j| l[i][j] * z[j]).sum::<f64>() / g.sqrt()).collect();
        let lf = logf(&u);
        logw.push(if lf == f64::NEG_INFINITY { f64::NEG_INFINITY } else { lf - log_q(&u) });
    }
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|&v| (v - m).exp()).collect();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    Ok(EvidenceEstimate { log_z: m + mean.ln(), method: EvidenceMethod::MonteCarlo, error_bound: se / mean })
}

/// Leave-one-out average energy −(1/N) Σ_i [log Z(x^N) − log Z(x^{≠i})].
pub fn avg_energy_loocv(model: &dyn Model, prior: &Prior, data: &Dataset) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidInput("leave-one-out needs N ≥ 2".into()));
    }
    let full = log_evidence_auto(model, prior, data)?.log_z;
    let mut acc = 0.0;
    for i in 0..n {
        let sub = log_evidence_auto(model, prior, &data.without(i)?)?.log_z;
        if !sub.is_finite() {
            return Err(Error::Divergence(format!("leave-one-out evidence without sample {i} is not finite")));
        }
        acc += full - sub;
    }
    Ok(-acc / n as f64)
}

/// Sample Gibbs entropy N·(U − F) with U from leave-one-out and F = −log Z/N.
pub fn gibbs_entropy_sample(model: &dyn Model, prior: &Prior, data: &Dataset) -> Result<f64> {
    let n = data.len() as f64;
    let u = avg_energy_loocv(model, prior, data)?;
    let f = -log_evidence_auto(model, prior, data)?.log_z / n;
    Ok(n * (u - f))
}

/// Fisher information at θ0: closed form when provided, otherwise second
/// differences of the cross entropy with Richardson extrapolation.
pub fn fisher_information(model: &dyn Model, theta0: &ParamPoint) -> Result<Vec<Vec<f64>>> {
    if !model.is_regular() {
        return Err(Error::NotDefined(format!("{} is not regular; Fisher information undefined", model.id())));
    }
    model.param_space().check(theta0)?;
    if let Some(i) = model.fisher_closed_form(theta0) {
        return Ok(i);
    }
    if !theta0.discrete.is_empty() {
        return Err(Error::NotDefined("Fisher information on lattice coordinates".into()));
    }
    let rule: Vec<(Vec<f64>, f64)> = match model.observation_rule(theta0) {
        Some(r) => r,
        None => {
            let mut rng = stream(0xf15e, 0, 0);
            let n = 40_000;
            (0..n).map(|_| (model.sample(theta0, &mut rng), 1.0 / n as f64)).collect()
        }
    };
    let h_of = |t: &[f64]| -> f64 {
        let p = ParamPoint::continuous(t.to_vec());
        -rule.iter().map(|(x, w)| w * model.log_likelihood(x, &p)).sum::<f64>()
    };
    let k = theta0.continuous.len();
    let d2 = |i: usize, j: usize, h: f64| -> f64 {
        let hi = h * theta0.continuous[i].abs().max(1e-2);
        let hj = h * theta0.continuous[j].abs().max(1e-2);
        let at = |a: f64, b: f64| {
            let mut t = theta0.continuous.clone();
            t[i] += a;
            t[j] += b;
            h_of(&t)
        };
        if i == j {
            (at(hi, 0.0) - 2.0 * at(0.0, 0.0) + at(-hi, 0.0)) / (hi * hi)
        } else {
            (at(hi, hj) - at(hi, -hj) - at(-hi, hj) + at(-hi, -hj)) / (4.0 * hi * hj)
        }
    };
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let a = d2(i, j, 2e-3);
            let b = d2(i, j, 1e-3);
            let v = b + (b - a) / 3.0;
            if !v.is_finite() {
                return Err(Error::NotDefined("cross entropy not twice differentiable at θ0".into()));
            }
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// δθⁱ = N^{−1/2} √[I⁻¹]ⁱⁱ.
pub fn statistical_resolution(model: &dyn Model, theta0: &ParamPoint, n: f64) -> Result<Vec<f64>> {
    let i = fisher_information(model, theta0)?;
    let inv = spd_inverse(&i).ok_or_else(|| Error::NotDefined("singular Fisher information".into()))?;
    Ok((0..inv.len()).map(|k| (inv[k][k] / n).sqrt()).collect())
}

/// Determinant of a small matrix by LU elimination.
pub fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap_or(c);
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// (−E_{q0} log q(x|x^N), mean_i −E_{q0} log q(x|x^{≠i})) using the model's
/// own routine when present, else evidence ratios on its observation rule.
pub fn predictive_cross_entropies(
    model: &dyn Model,
    prior: &Prior,
    theta0: &ParamPoint,
    data: &Dataset,
) -> Result<(f64, f64)> {
    if let Some(r) = model.predictive_cross_entropies(prior, theta0, data) {
        return r;
    }
    let rule = model
        .observation_rule(theta0)
        .ok_or_else(|| Error::NotSupported(format!("{} has no observation rule", model.id())))?;
    let ce = |d: &Dataset| -> Result<f64> {
        let base = log_evidence_auto(model, prior, d)?.log_z;
        let mut acc = 0.0;
        for (x, w) in &rule {
            acc -= w * (log_evidence_auto(model, prior, &d.with(x)?)?.log_z - base);
        }
        Ok(acc)
    };
    let ce_n = ce(data)?;
    let mut loo = 0.0;
    for i in 0..data.len() {
        loo += ce(&data.without(i)?)?;
    }
    Ok((ce_n, loo / data.len() as f64))
}

//! Two-component exponential mixture with the flat prior on a declared
//! rate window, integrated on a (p, log k1, log k2) grid.

use crate::error::{Error, Result};
use crate::model::{EvidenceEstimate, EvidenceMethod, Model};
use crate::prior::{Prior, PriorShape};
use crate::quad::gauss_laguerre;
use crate::rng::StreamRng;
use crate::space::{AxisScale, ContinuousDim, Dataset, ParamPoint, ParamSpace};
use crate::special::{log_add_exp, log_sum_exp};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpMixture2 {
    pub kmin: f64,
    pub kmax: f64,
    /// Grid points on p ∈ [0, 1] (odd, so the halved grid nests).
    pub n_p: usize,
    /// Grid points per log-spaced rate axis (odd).
    pub n_k: usize,
}

impl Default for ExpMixture2 {
    fn default() -> Self {
        ExpMixture2 { kmin: 0.1, kmax: 100.0, n_p: 201, n_k: 201 }
    }
}

/// Wedge grid k1 ≤ k2 with trapezoid weights in p and log k.
struct Grid {
    p: Vec<f64>,
    k: Vec<f64>,
    /// (p index, k1 index, k2 index, log weight)
    points: Vec<(usize, usize, usize, f64)>,
    /// Same points re-weighted for the grid with every other node removed
    /// (−inf when the point is not on the coarse grid).
    coarse: Vec<f64>,
}

fn trapezoid_log_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|i| if i == 0 || i == n - 1 { (0.5 * h).ln() } else { h.ln() }).collect()
}

impl ExpMixture2 {
    fn grid(&self) -> Result<Grid> {
        if self.n_p < 3 || self.n_k < 3 || self.n_p % 2 == 0 || self.n_k % 2 == 0 {
            return Err(Error::InvalidInput("mixture grid sizes must be odd and at least 3".into()));
        }
        if !(self.kmin > 0.0 && self.kmax > self.kmin) {
            return Err(Error::InvalidInput("mixture rate window must satisfy 0 < kmin < kmax".into()));
        }
        let hp = 1.0 / (self.n_p - 1) as f64;
        let p: Vec<f64> = (0..self.n_p).map(|i| i as f64 * hp).collect();
        let (u0, u1) = (self.kmin.ln(), self.kmax.ln());
        let hu = (u1 - u0) / (self.n_k - 1) as f64;
        let k: Vec<f64> = (0..self.n_k).map(|i| (u0 + hu * i as f64).exp()).collect();
        let wp = trapezoid_log_weights(self.n_p, hp);
        let wk = trapezoid_log_weights(self.n_k, hu);
        let wp2 = trapezoid_log_weights(self.n_p.div_ceil(2), 2.0 * hp);
        let wk2 = trapezoid_log_weights(self.n_k.div_ceil(2), 2.0 * hu);
        let mut points = Vec::new();
        let mut coarse = Vec::new();
        for a in 0..self.n_p {
            for i in 0..self.n_k {
                for j in i..self.n_k {
                    // flat prior in k → Jacobian k in log coordinates; off-diagonal
                    // wedge points stand for their mirror image too
                    let sym = if i == j { 0.0 } else { std::f64::consts::LN_2 };
                    let jac = k[i].ln() + k[j].ln();
                    points.push((a, i, j, wp[a] + wk[i] + wk[j] + jac + sym));
                    coarse.push(if a % 2 == 0 && i % 2 == 0 && j % 2 == 0 {
                        wp2[a / 2] + wk2[i / 2] + wk2[j / 2] + jac + sym
                    } else {
                        f64::NEG_INFINITY
                    });
                }
            }
        }
        Ok(Grid { p, k, points, coarse })
    }

    fn flat_prior(prior: &Prior) -> bool {
        prior.bounds.is_none() && matches!(prior.shape, PriorShape::Flat)
    }

    /// Log likelihood of every wedge point.
    fn grid_log_likelihood(&self, g: &Grid, data: &Dataset) -> Vec<f64> {
        let dens: Vec<Vec<f64>> =
            g.k.iter().map(|&k| data.values().iter().map(|&x| k * (-k * x).exp()).collect()).collect();
        g.points
            .par_iter()
            .map(|&(a, i, j, _)| {
                let p = g.p[a];
                let (di, dj) = (&dens[i], &dens[j]);
                let mut s = 0.0;
                for n in 0..di.len() {
                    s += (p * di[n] + (1.0 - p) * dj[n]).max(1e-300).ln();
                }
                s
            })
            .collect()
    }

    fn normalized_posterior(g: &Grid, ll: &[f64]) -> Vec<f64> {
        let lp: Vec<f64> = ll.iter().zip(&g.points).map(|(l, pt)| l + pt.3).collect();
        let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lp.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    /// −Σ_nodes w log q(x|posterior) using the separable predictive.
    fn cross_entropy(g: &Grid, post: &[f64], node_dens: &[Vec<f64>], node_w: &[f64]) -> f64 {
        let nk = g.k.len();
        let mut a = vec![0.0; nk];
        let mut b = vec![0.0; nk];
        for (&(pi, i, j, _), &w) in g.points.iter().zip(post) {
            a[i] += w * g.p[pi];
            b[j] += w * (1.0 - g.p[pi]);
        }
        let mut ce = 0.0;
        for (x, &wx) in node_w.iter().enumerate() {
            let mut q = 0.0;
            for i in 0..nk {
                q += (a[i] + b[i]) * node_dens[i][x];
            }
            ce -= wx * q.max(1e-300).ln();
        }
        ce
    }
}

impl ExpMixture2 {
    /// EM inside the declared rate window.
    fn em(&self, data: &Dataset) -> (ParamPoint, bool) {
        let m = self;
        let xs = data.values();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let (mut p, mut k1, mut k2) = (0.5, 2.0 / mean, 0.5 / mean);
        for _ in 0..2000 {
            let (mut r1, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for &x in xs {
                let a = p * k1 * (-k1 * x).exp();
                let b = (1.0 - p) * k2 * (-k2 * x).exp();
                let g = if a + b > 0.0 { a / (a + b) } else { 0.5 };
                r1 += g;
                s1 += g * x;
                s2 += (1.0 - g) * x;
            }
            let n = xs.len() as f64;
            let np = r1 / n;
            let nk1 = if s1 > 0.0 { (r1 / s1).clamp(m.kmin, m.kmax) } else { m.kmax };
            let nk2 = if s2 > 0.0 { ((n - r1) / s2).clamp(m.kmin, m.kmax) } else { m.kmax };
            let done = (np - p).abs() < 1e-12 && (nk1 - k1).abs() < 1e-12 * k1 && (nk2 - k2).abs() < 1e-12 * k2;
            (p, k1, k2) = (np, nk1, nk2);
            if done {
                break;
            }
        }
        let edge = |k: f64| (k - m.kmin).abs() < 1e-9 * m.kmin || (k - m.kmax).abs() < 1e-9 * m.kmax;
        let boundary = p < 1e-6 || p > 1.0 - 1e-6 || edge(k1) || edge(k2) || (k1 - k2).abs() < 1e-6 * k1;
        (ParamPoint::continuous(vec![p, k1, k2]), boundary)
    }
}

impl Model for ExpMixture2 {
    fn id(&self) -> String {
        format!("mixture:kmin={},kmax={},np={},nk={}", self.kmin, self.kmax, self.n_p, self.n_k)
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn param_space(&self) -> ParamSpace {
        let k = |name: &str| ContinuousDim {
            name: name.into(),
            lo: self.kmin,
            hi: self.kmax,
            lo_open: false,
            hi_open: false,
            scale: AxisScale::Log,
        };
        ParamSpace {
            continuous: vec![ContinuousDim::interval("p", 0.0, 1.0), k("k1"), k("k2")],
            ..Default::default()
        }
    }
    fn mle_flagged(&self, data: &Dataset) -> Option<Result<(ParamPoint, bool)>> {
        if data.is_empty() || data.values().iter().any(|&x| x < 0.0) {
            return Some(Err(Error::InvalidInput("mixture MLE needs non-negative data".into())));
        }
        Some(Ok(self.em(data)))
    }
    fn log_likelihood(&self, x: &[f64], theta: &ParamPoint) -> f64 {
        let (p, k1, k2) = (theta.continuous[0], theta.continuous[1], theta.continuous[2]);
        if x[0] < 0.0 || !(0.0..=1.0).contains(&p) || k1 <= 0.0 || k2 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let a = if p > 0.0 { p.ln() + k1.ln() - k1 * x[0] } else { f64::NEG_INFINITY };
        let b = if p < 1.0 { (1.0 - p).ln() + k2.ln() - k2 * x[0] } else { f64::NEG_INFINITY };
        log_add_exp(a, b)
    }
    fn sample(&self, theta: &ParamPoint, rng: &mut StreamRng) -> Vec<f64> {
        let (p, k1, k2) = (theta.continuous[0], theta.continuous[1], theta.continuous[2]);
        let u: f64 = rng.random();
        let e: f64 = Exp1.sample(rng);
        vec![if u < p { e / k1 } else { e / k2 }]
    }
    fn mirror(&self, theta: &ParamPoint) -> Option<ParamPoint> {
        let c = &theta.continuous;
        Some(ParamPoint::continuous(vec![1.0 - c[0], c[2], c[1]]))
    }
    fn param_hint(&self, data: &Dataset) -> ParamPoint {
        let m = data.values().iter().sum::<f64>() / data.len() as f64;
        let k = (1.0 / m.max(1e-12)).clamp(self.kmin, self.kmax);
        ParamPoint::continuous(vec![0.5, (0.5 * k).max(self.kmin), (2.0 * k).min(self.kmax)])
    }
    fn observation_rule(&self, theta0: &ParamPoint) -> Option<Vec<(Vec<f64>, f64)>> {
        let (p, k1, k2) = (theta0.continuous[0], theta0.continuous[1], theta0.continuous[2]);
        let gl = gauss_laguerre(40);
        let mut out = Vec::new();
        for (w, k) in [(p, k1), (1.0 - p, k2)] {
            if w > 0.0 {
                out.extend(gl.iter().map(|&(x, gw)| (vec![x / k], gw * w)));
            }
        }
        Some(out)
    }
    fn custom_log_evidence(&self, prior: &Prior, data: &Dataset) -> Option<Result<EvidenceEstimate>> {
        if !Self::flat_prior(prior) {
            return None;
        }
        Some(mixture_log_evidence(self, data).map(|mut e| {
            e.log_z += prior.log_c;
            e
        }))
    }
    fn predictive_cross_entropies(
        &self,
        prior: &Prior,
        theta0: &ParamPoint,
        data: &Dataset,
    ) -> Option<Result<(f64, f64)>> {
        if !Self::flat_prior(prior) {
            return None;
        }
        Some((|| {
            let g = self.grid()?;
            let rule = self.observation_rule(theta0).unwrap_or_default();
            let node_w: Vec<f64> = rule.iter().map(|r| r.1).collect();
            let node_dens: Vec<Vec<f64>> =
                g.k.iter().map(|&k| rule.iter().map(|(x, _)| k * (-k * x[0]).exp()).collect()).collect();
            let ll = self.grid_log_likelihood(&g, data);
            let post = Self::normalized_posterior(&g, &ll);
            let ce_n = Self::cross_entropy(&g, &post, &node_dens, &node_w);
            let loo: Vec<f64> = (0..data.len())
                .into_par_iter()
                .map(|n| {
                    let x = data.sample(n)[0];
                    let mut w: Vec<f64> = g
                        .points
                        .iter()
                        .zip(&post)
                        .map(|(&(a, i, j, _), &pw)| {
                            let p = g.p[a];
                            let q = p * g.k[i] * (-g.k[i] * x).exp() + (1.0 - p) * g.k[j] * (-g.k[j] * x).exp();
                            pw / q.max(1e-300)
                        })
                        .collect();
                    let s: f64 = w.iter().sum();
                    for v in w.iter_mut() {
                        *v /= s;
                    }
                    Self::cross_entropy(&g, &w, &node_dens, &node_w)
                })
                .collect();
            Ok((ce_n, loo.iter().sum::<f64>() / loo.len() as f64))
        })())
    }
}

/// Grid evidence for the flat prior on the model's rate window; the error
/// bound compares against the grid with every other node removed.
pub fn mixture_log_evidence(model: &ExpMixture2, data: &Dataset) -> Result<EvidenceEstimate> {
    if data.values().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidInput("mixture data must be nonnegative".into()));
    }
    let g = model.grid()?;
    let ll = model.grid_log_likelihood(&g, data);
    let fine: Vec<f64> = ll.iter().zip(&g.points).map(|(l, pt)| l + pt.3).collect();
    let coarse: Vec<f64> = ll.iter().zip(&g.coarse).map(|(l, w)| l + w).collect();
    let lf = log_sum_exp(&fine);
    let lc = log_sum_exp(&coarse);
    Ok(EvidenceEstimate { log_z: lf, method: EvidenceMethod::Quadrature, error_bound: ((lf - lc).abs() / 3.0).max(1e-15) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::thermo::simulate;

    #[test]
    fn relabeling_invariance() {
        let m = ExpMixture2 { n_p: 21, n_k: 21, ..Default::default() };
        let a = ParamPoint::continuous(vec![0.3, 1.0, 7.0]);
        let b = m.mirror(&a).unwrap();
        for x in [0.01, 0.5, 3.0] {
            assert!((m.log_likelihood(&[x], &a) - m.log_likelihood(&[x], &b)).abs() < 1e-14);
        }
        let d = simulate(&m, &a, 30, &mut stream(3, 0, 0)).unwrap();
        let e = mixture_log_evidence(&m, &d).unwrap();
        assert!(e.log_z.is_finite() && e.error_bound > 0.0);
    }
}

//! Adaptive trapezoid quadrature of log-integrands.
//!
//! All routines integrate `exp(f)` given `f` and return the logarithm of the
//! integral, so posteriors of any height can be handled.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Relative tolerance on the integral.
    pub rel_tol: f64,
    /// Integration stops where the integrand is this many nats below its peak.
    pub tail_nats: f64,
    /// Maximum number of interval doublings after the initial 16 intervals.
    pub max_doublings: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { rel_tol: 1e-11, tail_nats: 42.0, max_doublings: 11 }
    }
}

/// Result of a 1-D log-space integration.
#[derive(Debug, Clone, Copy)]
pub struct LogIntegral {
    pub log_value: f64,
    /// Estimated relative error of the integral.
    pub rel_err: f64,
    /// Location of the integrand's maximum.
    pub peak: f64,
}

fn eval(f: &mut dyn FnMut(f64) -> f64, x: f64) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Find a local maximum of `f` on `[a, b]` starting from `hint` with step `scale`.
fn find_peak(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, hint: f64, scale: f64) -> Option<(f64, f64)> {
    let clamp = |x: f64| x.max(a).min(b);
    let mut x = clamp(hint);
    let mut fx = eval(f, x);
    // locate a point inside the support of the integrand
    if fx == f64::NEG_INFINITY {
        let mut step = scale;
        let mut found = false;
        for _ in 0..80 {
            for &cand in &[clamp(x + step), clamp(x - step)] {
                let v = eval(f, cand);
                if v > f64::NEG_INFINITY {
                    x = cand;
                    fx = v;
                    found = true;
                    break;
                }
            }
            if found {
                break;
            }
            step *= 1.6;
        }
        // narrow support next to the starting point
        let mut step = scale / 1.6;
        for _ in 0..80 {
            if found {
                break;
            }
            for &cand in &[clamp(x + step), clamp(x - step)] {
                let v = eval(f, cand);
                if v > f64::NEG_INFINITY {
                    x = cand;
                    fx = v;
                    found = true;
                    break;
                }
            }
            step /= 1.6;
        }
        if !found {
            return None;
        }
    }
    let mut step = scale;
    let mut iters = 0;
    while step > 1e-9 * scale.max(x.abs() * 1e-3) && iters < 400 {
        iters += 1;
        let r = clamp(x + step);
        let fr = eval(f, r);
        if fr > fx {
            x = r;
            fx = fr;
            step *= 2.0;
            continue;
        }
        let l = clamp(x - step);
        let fl = eval(f, l);
        if fl > fx {
            x = l;
            fx = fl;
            step *= 2.0;
            continue;
        }
        step *= 0.25;
    }
    Some((x, fx))
}

/// Walk away from the peak until the integrand drops `tail` nats or the bound is hit.
fn bracket(
    f: &mut dyn FnMut(f64) -> f64,
    peak: f64,
    fpeak: f64,
    bound: f64,
    dir: f64,
    width: f64,
    tail: f64,
) -> Result<(f64, bool)> {
    let mut step = width;
    let mut x = peak;
    for _ in 0..400 {
        let next = x + dir * step;
        let past = if dir > 0.0 { next >= bound } else { next <= bound };
        if past {
            if bound.is_finite() {
                let fb = eval(f, bound);
                return Ok((bound, fb > fpeak - tail));
            }
            return Err(Error::Numeric("unbounded axis reached infinity".into()));
        }
        let v = eval(f, next);
        if v < fpeak - tail {
            return Ok((next, false));
        }
        x = next;
        step *= 1.5;
    }
    Err(Error::Divergence(format!(
        "integrand does not decay in the {} direction",
        if dir > 0.0 { "positive" } else { "negative" }
    )))
}

/// `log ∫_a^b exp(f(x)) dx` for a unimodal-ish `f`.
pub fn log_integrate(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    hint: f64,
    scale: f64,
    opts: &QuadOptions,
) -> Result<LogIntegral> {
    let (peak, fpeak) = match find_peak(f, a, b, hint, scale) {
        Some(p) => p,
        None => {
            return Ok(LogIntegral { log_value: f64::NEG_INFINITY, rel_err: 0.0, peak: hint });
        }
    };
    if fpeak == f64::INFINITY {
        return Err(Error::Divergence("integrand is infinite".into()));
    }
    // curvature width
    let h = 1e-3 * scale.max(1e-12);
    let fl = eval(f, (peak - h).max(a));
    let fr = eval(f, (peak + h).min(b));
    let curv = (fl - 2.0 * fpeak + fr) / (h * h);
    let width = if curv.is_finite() && curv < 0.0 { (1.0 / -curv).sqrt().min(10.0 * scale) } else { scale };
    let width = width.max(1e-12);
    let (hi, hard_hi) = bracket(f, peak, fpeak, b, 1.0, width, opts.tail_nats)?;
    let (lo, hard_lo) = bracket(f, peak, fpeak, a, -1.0, width, opts.tail_nats)?;
    let hard = hard_hi || hard_lo;
    if !(hi > lo) {
        return Ok(LogIntegral { log_value: f64::NEG_INFINITY, rel_err: 0.0, peak });
    }
    let mut n = 16usize;
    let mut offset = fpeak;
    let mut vals: Vec<f64> = (0..=n).map(|i| eval(f, lo + (hi - lo) * i as f64 / n as f64)).collect();
    let trap = |vals: &[f64], off: f64| -> f64 {
        let m = vals.len() - 1;
        let h = (hi - lo) / m as f64;
        let mut s = 0.0;
        for (i, &v) in vals.iter().enumerate() {
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            s += w * (v - off).exp();
        }
        s * h
    };
    let mut t_prev = trap(&vals, offset);
    let mut result = None;
    for _ in 0..opts.max_doublings {
        let mut next = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            next.push(vals[i]);
            next.push(eval(f, lo + (hi - lo) * (2 * i + 1) as f64 / (2 * n) as f64));
        }
        next.push(vals[n]);
        vals = next;
        n *= 2;
        let vmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if vmax - offset > 600.0 {
            offset = vmax;
            t_prev = f64::NAN;
        }
        let t = trap(&vals, offset);
        if t_prev.is_finite() && t > 0.0 {
            let diff = (t - t_prev).abs();
            let est = if hard { t + (t - t_prev) / 3.0 } else { t };
            if diff <= opts.rel_tol * t && n >= 64 {
                result = Some((est, diff / 3.0 / t));
                break;
            }
            result = Some((est, diff / 3.0 / t));
        }
        t_prev = t;
    }
    match result {
        Some((v, e)) if v > 0.0 => Ok(LogIntegral { log_value: offset + v.ln(), rel_err: e, peak }),
        Some(_) => Ok(LogIntegral { log_value: f64::NEG_INFINITY, rel_err: 0.0, peak }),
        None => Err(Error::Numeric("quadrature produced no estimate".into())),
    }
}

/// `log Σ_{m=lo..hi} exp(f(m))` over a lattice, truncated where terms fall
/// `tail_nats` below the largest. `hint` is a starting lattice point.
pub fn log_lattice_sum(
    f: &mut dyn FnMut(i64) -> f64,
    lo: Option<i64>,
    hi: Option<i64>,
    hint: i64,
    tail_nats: f64,
) -> Result<(f64, f64)> {
    let lo_b = lo.unwrap_or(i64::MIN / 4);
    let hi_b = hi.unwrap_or(i64::MAX / 4);
    let mut m = hint.clamp(lo_b, hi_b);
    let mut fm = f(m);
    // climb
    let mut step: i64 = 1;
    loop {
        let mut moved = false;
        for &cand in &[m + step, m - step] {
            if cand < lo_b || cand > hi_b {
                continue;
            }
            let v = f(cand);
            if v > fm {
                m = cand;
                fm = v;
                moved = true;
                break;
            }
        }
        if moved {
            step = (step * 2).min(1 << 20);
        } else if step > 1 {
            step /= 2;
        } else {
            break;
        }
    }
    if fm == f64::NEG_INFINITY {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    let mut acc = 1.0;
    let mut tail_bound = 0.0;
    for dir in [1i64, -1] {
        let mut k = m + dir;
        let mut count = 0u64;
        loop {
            if k < lo_b || k > hi_b {
                break;
            }
            let v = f(k) - fm;
            if v > 1e-9 && v.is_finite() {
                return Err(Error::Numeric("lattice sum is not unimodal".into()));
            }
            acc += v.exp();
            if v < -tail_nats {
                tail_bound += v.exp() * 10.0;
                break;
            }
            k += dir;
            count += 1;
            if count > 50_000_000 {
                return Err(Error::Divergence("lattice sum does not decay".into()));
            }
        }
    }
    Ok((fm + acc.ln(), tail_bound / acc))
}

/// Gauss–Laguerre nodes and weights for ∫_0^∞ e^{−x} f(x) dx.
pub fn gauss_laguerre(n: usize) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(n);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n {
        // initial guesses as in the classic recipe
        z = if i == 0 {
            3.0 / (1.0 + 2.4 * nf)
        } else if i == 1 {
            z + 15.0 / (1.0 + 2.5 * nf)
        } else {
            let ai = (i - 1) as f64;
            z + ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - out[i - 2].0)
        };
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0f64, 0.0f64);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
            }
            let pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs() {
                break;
            }
        }
        // weight from the derivative and the neighbouring polynomial
        let (mut p1, mut p2) = (1.0f64, 0.0f64);
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
        }
        let dp = (nf * p1 - nf * p2) / z;
        out.push((z, -1.0 / (dp * nf * p2)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let o = QuadOptions::default();
        let r = log_integrate(&mut |x: f64| -0.5 * (x - 3.0) * (x - 3.0) / 0.04, f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0, &o)
            .unwrap();
        let exact = 0.5 * (2.0 * std::f64::consts::PI * 0.04).ln();
        assert!((r.log_value - exact).abs() < 1e-12);
        assert!((r.peak - 3.0).abs() < 1e-6);
    }

    #[test]
    fn hard_edge_exponential() {
        let o = QuadOptions::default();
        // ∫_0^1 e^{-x} dx
        let r = log_integrate(&mut |x: f64| -x, 0.0, 1.0, 0.5, 0.1, &o).unwrap();
        assert!((r.log_value - (1.0 - (-1f64).exp()).ln()).abs() < 1e-10, "{}", r.log_value);
    }

    #[test]
    fn huge_log_values() {
        let o = QuadOptions::default();
        let r = log_integrate(&mut |x: f64| 5000.0 - x * x, f64::NEG_INFINITY, f64::INFINITY, 10.0, 1.0, &o).unwrap();
        assert!((r.log_value - 5000.0 - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-11);
    }

    #[test]
    fn lattice_sum_geometric() {
        let (v, _) = log_lattice_sum(&mut |m: i64| -(m as f64), Some(1), None, 5, 40.0).unwrap();
        let exact = -(1f64.exp() - 1.0).ln();
        assert!((v - exact).abs() < 1e-14);
    }

    #[test]
    fn laguerre_moments() {
        let r = gauss_laguerre(40);
        for k in 0..12 {
            let s: f64 = r.iter().map(|(x, w)| w * x.powi(k)).sum();
            let f: f64 = (1..=k).map(|j| j as f64).product();
            assert!((s / f - 1.0).abs() < 1e-11, "moment {k}: {s}");
        }
    }

    #[test]
    fn nonintegrable_reports_divergence() {
        let o = QuadOptions::default();
        let r = log_integrate(&mut |_x: f64| 0.0, f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0, &o);
        assert!(matches!(r, Err(Error::Divergence(_))));
    }
}

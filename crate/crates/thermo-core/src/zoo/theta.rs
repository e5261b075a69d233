//! Theta-function numerics for the normal model with an integer-valued mean.
//!
//! With precision n = N/σ², the density of the sample mean on a unit
//! lattice of candidate means is z(t) = Σ_m √(n/2π) e^{−n(t−m)²/2}
//! = ϑ(πt; r), r = e^{−2π²/n}.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMode {
    /// Sum over lattice means (fast for large n).
    Direct,
    /// Poisson-resummed Fourier series (fast for small n).
    Resummed,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesBranch {
    /// Convergent q-series valid for all n.
    Series,
    /// Large-n closed form.
    Asymptotic,
    /// Series for n ≤ 200, asymptotic (with the exact Euler tail) beyond.
    Auto,
}

pub fn nome(n: f64) -> f64 {
    (-2.0 * PI * PI / n).exp()
}

/// log z(t; n).
pub fn theta_log_z(t: f64, n: f64, mode: ThetaMode) -> f64 {
    let direct = match mode {
        ThetaMode::Direct => true,
        ThetaMode::Resummed => false,
        ThetaMode::Auto => n > 2.0 * PI,
    };
    if direct {
        let c = t.round();
        let w = (2.0 * 60.0 / n).sqrt().ceil() + 2.0;
        let mut terms = Vec::new();
        let mut m = c - w;
        while m <= c + w {
            terms.push(-0.5 * n * (t - m) * (t - m));
            m += 1.0;
        }
        0.5 * (n / (2.0 * PI)).ln() + crate::special::log_sum_exp(&terms)
    } else {
        let r = nome(n);
        let mut s = 1.0;
        let mut k = 1.0f64;
        loop {
            let term = r.powf(k * k);
            s += 2.0 * term * (2.0 * PI * k * t).cos();
            if term < 1e-18 * s.abs() || k > 1e6 {
                break;
            }
            k += 1.0;
        }
        s.ln()
    }
}

/// Σ_{m≥1} log(1 − r^{2m}).
pub fn euler_log_product(n: f64, branch: SeriesBranch) -> f64 {
    let series = match branch {
        SeriesBranch::Series => true,
        SeriesBranch::Asymptotic => false,
        SeriesBranch::Auto => n <= 200.0,
    };
    if series {
        let r2 = nome(n).powi(2);
        if r2 == 0.0 {
            return 0.0;
        }
        // −Σ_k (1/k) r^{2k}/(1 − r^{2k})
        let mut s = 0.0;
        let mut p = r2;
        let mut k = 1.0;
        while p > 1e-18 * (1.0 - p) && k < 1e7 {
            s -= p / (k * -(-(2.0 * k) * 2.0 * PI * PI / n).exp_m1());
            k += 1.0;
            p *= r2;
        }
        s
    } else {
        let mut v = -n / 24.0 + PI * PI / (6.0 * n) + 0.5 * (n / (2.0 * PI)).ln();
        if branch == SeriesBranch::Auto {
            let mut m = 1.0;
            loop {
                let e = (-n * m).exp();
                if e < 1e-18 {
                    break;
                }
                v += (-e).ln_1p();
                m += 1.0;
            }
        }
        v
    }
}

/// A(n) = E Σ_{m≥1} log(1 + r^{2m−1} e^{−2πit}) with t ~ N(integer, 1/n).
pub fn theta_cross_term(n: f64, branch: SeriesBranch) -> f64 {
    let series = match branch {
        SeriesBranch::Series => true,
        SeriesBranch::Asymptotic => false,
        SeriesBranch::Auto => n <= 200.0,
    };
    if series {
        let a = 2.0 * PI * PI / n;
        let mut s = 0.0;
        let mut k = 1.0f64;
        loop {
            // (−1)^k/k · r^{k²+k}/(r^{2k} − 1)
            let num = (-a * (k * k + k)).exp();
            let den = (-a * 2.0 * k).exp_m1();
            let sign = if (k as i64) % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign / k * num / den;
            s += term;
            if num < 1e-18 * (-den) || k > 1e7 {
                break;
            }
            k += 1.0;
        }
        s
    } else {
        n / 48.0 - 0.25 - PI * PI / (12.0 * n)
    }
}

/// E[log z] for t ~ N(m0, 1/n), m0 on the lattice.
pub fn mean_log_z(n: f64, branch: SeriesBranch) -> f64 {
    euler_log_product(n, branch) + 2.0 * theta_cross_term(n, branch)
}

/// Entropy of the sample mean, ½ log(2πe/n).
pub fn statistic_entropy(n: f64) -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E / n).ln()
}

/// Per-dimension excess free energy −H_t − E log z (Ḡ − N·H0 for one axis).
pub fn excess_per_dim(n: f64) -> f64 {
    -statistic_entropy(n) - mean_log_z(n, SeriesBranch::Auto)
}

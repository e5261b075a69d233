//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Set THERMO_ACCEPTANCE=1,5,8 to run a subset.

use std::time::Instant;

use thermo_core::gpi::{gpi_recursive, RecursiveOptions};
use thermo_core::model::Model;
use thermo_core::oracles::{
    conjugate_learning_capacity, meanvar_learning_capacity, uniform_log_c, OracleKind, SymmetricKind,
};
use thermo_core::prior::{GridPrior, PriorShape};
use thermo_core::registry::{parse_model, PriorChoice};
use thermo_core::rng::{stream, stream_seed};
use thermo_core::selection::{
    aic, lindley_crossing, lindley_threshold, model_log_evidence, run_fig6, simulate_dataset, ExperimentConfig,
    LindleyMode, PriorMode, ZooModel,
};
use thermo_core::space::ParamPoint;
use thermo_core::thermo::{disorder_average, Route, ThermoOptions, ThermoReport};
use thermo_core::zoo::poisson::{poisson_log_z, PoissonZMode};
use thermo_core::zoo::theta::{theta_log_z, ThetaMode};
use thermo_core::zoo::PoissonStoich;

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run_spec(spec: &str, prior: &str, n: f64, replicates: usize, route: Route) -> ThermoReport {
    let entry = parse_model(spec).unwrap();
    let prior = PriorChoice::parse(prior).resolve(&entry, n).unwrap();
    let opts = ThermoOptions { replicates, seed: SEED, route, ..Default::default() };
    disorder_average(entry.model.as_ref(), &prior, &entry.theta0, n, &opts).unwrap()
}

fn within(x: f64, target: f64, k: f64, se: f64) -> bool {
    (x - target).abs() <= k * se
}

fn c1_equipartition() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 1..=3 {
        let r = run_spec(&format!("normal-conj:K={k},sigma=1,sigma_p=1,mu_p=0"), "natural", 100.0, 10_000, Route::Auto);
        let want = conjugate_learning_capacity(k as f64, 100.0, 1.0);
        let ok = within(r.cbar, want, 3.0, r.cse);
        pass &= ok;
        parts.push(format!("K={k} C={:.4}±{:.4} want {:.4}", r.cbar, r.cse, want));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    Outcome { pass, detail: format!("{}; {secs:.1}s (limit 60s)", parts.join(", ")) }
}

fn c2_conjugate_entropy() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 1..=3 {
        for n in [10.0, 100.0] {
            let r = run_spec(&format!("normal-conj:K={k},sigma=1,sigma_p=1,mu_p=0"), "natural", n, 10_000, Route::Auto);
            let want = 0.5 * k as f64 * (1.0 - n.ln());
            let ok = within(r.sbar, want, 3.0, r.sse);
            pass &= ok;
            parts.push(format!("K={k} N={n}: S={:.4}±{:.4} want {want:.4}{}", r.sbar, r.sse, if ok { "" } else { " ✗" }));
        }
        // N = N0/100 with N0 = 200
        let sp = (1.0f64 / 200.0).sqrt();
        let r = run_spec(&format!("normal-conj:K={k},sigma=1,sigma_p={sp},mu_p=0"), "natural", 2.0, 10_000, Route::Auto);
        let ok = r.sbar.abs() < 0.05;
        pass &= ok;
        parts.push(format!("K={k} N=N0/100: |S|={:.2e}", r.sbar.abs()));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn c3_meanvar() -> Outcome {
    let near = meanvar_learning_capacity(1, 1.001).unwrap();
    let far = meanvar_learning_capacity(1, 1e6).unwrap();
    let r = run_spec("normal-meanvar:D=1,mu0=0,sigma0=1", "natural", 10.0, 10_000, Route::Auto);
    let oracle = OracleKind::FixedPrior { kind: SymmetricKind::NormalMeanVar { d: 1 }, scale: 1.0, log_c: 0.0 }.thermo(10.0);
    let pass = near > 1e3 && (far - 1.0).abs() < 1e-3 && within(r.cbar, oracle.cbar, 3.0, r.cse);
    Outcome {
        pass,
        detail: format!(
            "C(1.001)={near:.1}, |C(1e6)-1|={:.1e}, MC C(10)={:.4}±{:.4} vs exact {:.4} (real-N {:.4})",
            (far - 1.0).abs(),
            r.cbar,
            r.cse,
            oracle.cbar,
            meanvar_learning_capacity(1, 10.0).unwrap()
        ),
    }
}

fn c4_freeze_out() -> Outcome {
    let sigma = 15f64.sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in 1..=3 {
        let spec = format!("normal-discrete:D={d},sigma={sigma},continuous=1");
        // δμ = σ/√N
        for (dmu, coarse) in [(3.0, false), (0.3, true)] {
            let n = (sigma / dmu).powi(2);
            let r = run_spec(&spec, "natural", n, 2, Route::Statistic);
            let ok = if coarse { r.cbar <= 0.05 } else { (r.cbar - 0.5 * d as f64).abs() <= 0.05 };
            pass &= ok;
            parts.push(format!("D={d} δμ={dmu}: C={:.4}{}", r.cbar, if ok { "" } else { " ✗" }));
        }
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn c5_poisson() -> Outcome {
    let c10 = run_spec("poisson:t=10,m0=6,b=0", "natural", 10.0, 2, Route::Statistic);
    let c500 = run_spec("poisson:t=500,m0=6,b=0", "natural", 500.0, 2, Route::Statistic);
    let model = PoissonStoich { t: 500.0, b: 0.0 };
    let prior = model.natural_prior();
    let theta = ParamPoint::discrete(vec![6]);
    let mut hits = 0;
    for r in 0..100 {
        let k = model.sample(&theta, &mut stream(SEED, r, 0))[0] as u64;
        if model.posterior(&prior, k, 6) > 0.99 {
            hits += 1;
        }
    }
    let pass = (c10.cbar - 0.5).abs() <= 0.1 && c500.cbar <= 0.05 && hits > 50;
    Outcome {
        pass,
        detail: format!("C(10)={:.4}, C(500)={:.4}, P(m=6|k)>0.99 in {hits}/100", c10.cbar, c500.cbar),
    }
}

fn c6_mixture() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, p0, want, tol) in [("θ_S", 1.0, 0.61, 0.10), ("θ_R", 0.5, 1.5, 0.15)] {
        let start = Instant::now();
        let r = run_spec(&format!("mixture:p0={p0},k10=1,k20=10,np=101,nk=61"), "natural", 100.0, 500, Route::Auto);
        let ok = (r.cbar - want).abs() <= tol;
        pass &= ok;
        parts.push(format!(
            "{label}: C={:.3}±{:.3} want {want}±{tol} ({:.0}s){}",
            r.cbar,
            r.cse,
            start.elapsed().as_secs_f64(),
            if ok { "" } else { " ✗" }
        ));
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn c7_gpi_fixed_points() -> Outcome {
    let logspace = |a: f64, b: f64| -> Vec<f64> { (0..10).map(|i| (a.ln() + (b / a).ln() * i as f64 / 9.0).exp()).collect() };
    let families: Vec<(&str, Vec<String>)> = vec![
        ("normal-mean", (0..10).map(|i| format!("normal-mean:D=1,sigma=1,mu0={}", -5.0 + i as f64 * 10.0 / 9.0)).collect()),
        ("normal-meanvar", logspace(0.1, 10.0).iter().map(|s| format!("normal-meanvar:D=1,mu0=0,sigma0={s}")).collect()),
        ("exponential", logspace(0.1, 10.0).iter().map(|l| format!("exponential:lambda0={l}")).collect()),
        ("uniform", logspace(0.1, 10.0).iter().map(|l| format!("uniform:L0={l}")).collect()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, specs) in &families {
        let mut worst = 0.0f64;
        for n in [5.0, 20.0, 100.0] {
            for s in specs {
                let r = run_spec(s, "gpi", n, 2000, Route::Auto);
                let z = r.sbar.abs() / r.sse;
                worst = worst.max(z);
                pass &= r.sbar.abs() < 3.0 * r.sse;
            }
        }
        parts.push(format!("{name} max|S|/se={worst:.2}"));
    }
    let printed = (1..=200).map(|n| (uniform_log_c(n as f64) - SymmetricKind::UniformSupport.log_c(n as f64)).abs()).fold(0.0, f64::max);
    pass &= printed <= 1e-12;
    parts.push(format!("uniform log c vs printed {printed:.1e}"));
    Outcome { pass, detail: parts.join(", ") }
}

fn poisson_recursion(t: f64) -> (thermo_core::gpi::GpiPrior, Vec<f64>) {
    let axis: Vec<f64> = (1..=400).map(|m| m as f64).collect();
    let start = GridPrior::new(vec![axis.clone()], vec![0.0; axis.len()], true).unwrap();
    let model = PoissonStoich { t, b: 0.0 };
    let opts = RecursiveOptions { report: Some(200), seed: SEED, ..Default::default() };
    (gpi_recursive(&model, &start, t, &opts).unwrap(), axis)
}

fn c8_recursive() -> Outcome {
    let (g, axis) = poisson_recursion(1.0);
    let log_w = match &g.prior.shape {
        PriorShape::Grid(gr) => gr.log_w.clone(),
        _ => unreachable!(),
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = (49..200).map(|i| (axis[i].ln(), log_w[i])).unzip();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let mut pass = (slope + 0.5).abs() <= 0.05;
    let mut parts = vec![format!("t=1 slope {slope:.4}")];
    for t in [100.0, 500.0] {
        let (g, _) = poisson_recursion(t);
        let ok = g.converged && g.iterations <= 1;
        pass &= ok;
        parts.push(format!("t={t}: {} iteration(s), max|S|={:.1e}, converged={}", g.iterations, g.final_residual().unwrap(), g.converged));
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn c9_series() -> Outcome {
    let mut theta_err = 0.0f64;
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        let a = theta_log_z(t, 120.0, ThetaMode::Direct);
        let b = theta_log_z(t, 120.0, ThetaMode::Resummed);
        theta_err = theta_err.max((a - b).abs().exp_m1());
    }
    let mut poisson_err = 0.0f64;
    let mut worst = (0, 0.0);
    for t in [1.0, 10.0, 500.0] {
        for k in 0..=50u64 {
            let z = [PoissonZMode::DirectSum, PoissonZMode::Resummed, PoissonZMode::Recursion].map(|m| poisson_log_z(k, t, 0.0, m));
            for i in 0..3 {
                for j in i + 1..3 {
                    let e = if z[i] == z[j] { 0.0 } else { (z[i] - z[j]).abs().exp_m1() };
                    let e = if e.is_nan() { f64::INFINITY } else { e };
                    if e > poisson_err {
                        poisson_err = e;
                        worst = (k, t);
                    }
                }
            }
        }
    }
    let pass = theta_err <= 1e-8 && poisson_err <= 1e-9;
    Outcome {
        pass,
        detail: format!(
            "theta direct vs resummed at n=120: {theta_err:.1e} (≤1e-8); poisson z max rel diff {poisson_err:.1e} at k={}, t={} (≤1e-9)",
            worst.0, worst.1
        ),
    }
}

fn c10_selection() -> Outcome {
    let gpi = run_fig6(&ExperimentConfig { mode: PriorMode::Gpi, n: 20, replicates: 200, seed: SEED, ..Default::default() }).unwrap();
    let norm = run_fig6(&ExperimentConfig { mode: PriorMode::NormalizedJeffreys, n: 20, replicates: 200, seed: SEED, ..Default::default() }).unwrap();
    let argmax = gpi.row_argmax();
    let diag = argmax.iter().enumerate().all(|(i, &j)| i == j);
    // a mean of exactly 1 with zero spread means every dataset
    let all_normal = norm.mean.iter().zip(&norm.stderr).all(|(m, s)| m[0] >= 1.0 - 1e-12 && s[0] <= 1e-12);
    let row = &gpi.mean[0];
    let occam = row[0] > row[1] && row[1] > row[2];
    Outcome {
        pass: diag && all_normal && occam,
        detail: format!(
            "GPI argmax {argmax:?}; normalized N-column min {:.6}; N-row {:.3} > {:.3} > {:.3}",
            norm.mean.iter().map(|m| m[0]).fold(1.0, f64::min),
            row[0],
            row[1],
            row[2]
        ),
    }
}

fn c11_aic() -> Outcome {
    let mut means = Vec::new();
    for n in [20usize, 100, 500] {
        let vals: Vec<f64> = (0..100)
            .map(|r| {
                let d = simulate_dataset(ZooModel::Exponential, &ZooModel::Exponential.theta0(), n, stream_seed(SEED, r, n as u64)).unwrap();
                let a = aic(ZooModel::Exponential.model().as_ref(), &d).unwrap().value;
                let z = model_log_evidence(ZooModel::Exponential, PriorMode::Gpi, &d).unwrap();
                (-z - a).abs()
            })
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let se = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() * (vals.len() - 1)) as f64).sqrt();
        means.push((n, m, se));
    }
    // non-increasing up to two standard errors, with a rounding floor
    let decreasing = means.windows(2).all(|w| w[1].1 <= w[0].1 + (2.0 * w[0].2.max(w[1].2)).max(1e-10));
    let last = means[2].1;
    // the normal-mean residual carries the O(1/N) trend for reference
    let trend: Vec<String> = [20.0f64, 100.0, 500.0]
        .iter()
        .map(|&n| format!("{:.4}", (0.5 * (1.0 + n * (1.0 / n).ln_1p()) - 1.0).abs()))
        .collect();
    Outcome {
        pass: decreasing && last < 0.1,
        detail: format!(
            "exponential mean |−logZ−AIC|: {}; normal-mean |𝒦−K| {}",
            means.iter().map(|(n, m, _)| format!("N={n} {m:.2e}")).collect::<Vec<_>>().join(", "),
            trend.join(" > ")
        ),
    }
}

fn c12_lindley() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (mode, name) in [(LindleyMode::Gpi, "GPI"), (LindleyMode::Normalized, "normalized")] {
        let pred = lindley_threshold(100.0, 1.0, 100.0, mode).unwrap();
        let cross = lindley_crossing(100.0, 1.0, 100, mode, 0.01, 20.0).unwrap();
        let rel = (cross - pred).abs() / pred;
        pass &= rel < 0.01;
        parts.push(format!("{name}: crossing {cross:.5} vs {pred:.5} (rel {rel:.1e})"));
    }
    Outcome { pass, detail: parts.join(", ") }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "equipartition", c1_equipartition),
        (2, "conjugate entropy curve", c2_conjugate_entropy),
        (3, "mean+variance divergence", c3_meanvar),
        (4, "lattice freeze-out", c4_freeze_out),
        (5, "poisson stoichiometry", c5_poisson),
        (6, "singular mixture", c6_mixture),
        (7, "gpi fixed points", c7_gpi_fixed_points),
        (8, "recursive solver", c8_recursive),
        (9, "series cross-checks", c9_series),
        (10, "model selection", c10_selection),
        (11, "aic equivalence", c11_aic),
        (12, "lindley-bartlett", c12_lindley),
    ];
    let only: Option<Vec<usize>> = std::env::var("THERMO_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    // cargo passes harness flags through; ignore them
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        ran += 1;
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {id:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{ran} passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

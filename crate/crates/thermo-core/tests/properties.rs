//! Invariants checked over random inputs.

use proptest::prelude::*;
use thermo_core::evidence::{log_evidence, log_evidence_auto};
use thermo_core::model::{EvidenceMethod, Theta0};
use thermo_core::oracles::{OracleKind, SymmetricKind};
use thermo_core::prior::Prior;
use thermo_core::quad::QuadOptions;
use thermo_core::selection::posteriors_from_log_evidence;
use thermo_core::space::{Dataset, ParamPoint};
use thermo_core::thermo::{disorder_average, quantities_from_triple, ThermoOptions};
use thermo_core::zoo::theta::{theta_log_z, ThetaMode};
use thermo_core::zoo::{Exponential, NormalMeanFlat};

fn positive_data(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..20.0, len)
}

fn jeffreys() -> Prior {
    Prior::power(vec![-1.0], 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    // S = N(U − F) and C from the same triple
    #[test]
    fn identity_chain(n in 2.0f64..500.0, g0 in -50.0f64..50.0, du in -5.0f64..5.0, dd in -1.0f64..1.0) {
        let g = [g0 - du + dd, g0, g0 + du];
        let [f, u, c, s] = quantities_from_triple(n.round(), g);
        let n = n.round();
        prop_assert!((s - n * (u - f)).abs() <= 1e-9 * (1.0 + s.abs() + n * u.abs()));
        prop_assert!((c + n * n * (g[2] - 2.0 * g[1] + g[0])).abs() <= 1e-9 * (1.0 + c.abs()));
    }

    // log Z(x^N) − log Z(x^{N−1}) is the Lomax predictive density
    #[test]
    fn chain_rule_exponential(x in positive_data(3..30)) {
        let full = Dataset::scalar(x.clone()).unwrap();
        let head = full.prefix(x.len() - 1).unwrap();
        let lz = log_evidence_auto(&Exponential, &jeffreys(), &full).unwrap().log_z;
        let lh = log_evidence_auto(&Exponential, &jeffreys(), &head).unwrap().log_z;
        let m = (x.len() - 1) as f64;
        let s: f64 = x[..x.len() - 1].iter().sum();
        let last = x[x.len() - 1];
        let pred = m.ln() + m * s.ln() - (m + 1.0) * (s + last).ln();
        prop_assert!((lz - lh - pred).abs() < 1e-9 * (1.0 + lz.abs()));
    }

    // the evidence does not depend on the order of exchangeable data
    #[test]
    fn evidence_is_permutation_invariant(x in positive_data(2..25), rot in 0usize..25) {
        let mut y = x.clone();
        let len = y.len();
        y.rotate_left(rot % len);
        let a = log_evidence_auto(&Exponential, &jeffreys(), &Dataset::scalar(x).unwrap()).unwrap().log_z;
        let b = log_evidence_auto(&Exponential, &jeffreys(), &Dataset::scalar(y).unwrap()).unwrap().log_z;
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    // dλ/λ is invariant under λ → log λ, so rescaling the data by c only
    // shifts log Z by −N log c
    #[test]
    fn scale_reparametrization(x in positive_data(2..20), c in 0.05f64..20.0) {
        let n = x.len() as f64;
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let a = log_evidence_auto(&Exponential, &jeffreys(), &Dataset::scalar(x).unwrap()).unwrap().log_z;
        let b = log_evidence_auto(&Exponential, &jeffreys(), &Dataset::scalar(scaled).unwrap()).unwrap().log_z;
        prop_assert!((b - (a - n * c.ln())).abs() < 1e-9 * (1.0 + a.abs()));
    }

    // numerical and closed-form evidences agree
    #[test]
    fn quadrature_matches_closed_form(x in positive_data(2..15)) {
        let d = Dataset::scalar(x).unwrap();
        let exact = log_evidence(&Exponential, &jeffreys(), &d, EvidenceMethod::ClosedForm, &QuadOptions::default()).unwrap();
        let quad = log_evidence(&Exponential, &jeffreys(), &d, EvidenceMethod::Quadrature, &QuadOptions::default()).unwrap();
        prop_assert!((exact.log_z - quad.log_z).abs() < 1e-6 + quad.error_bound, "{} vs {}", exact.log_z, quad.log_z);
    }

    // a constant shift δ of log w moves S̄ by exactly δ and leaves C̄ alone:
    // the GPI update is linear in log w
    #[test]
    fn entropy_linear_in_prior_shift(n in 3u32..200, delta in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let kind = SymmetricKind::Exponential;
        let a = OracleKind::FixedPrior { kind, scale, log_c: 0.0 }.thermo(n as f64);
        let b = OracleKind::FixedPrior { kind, scale, log_c: delta }.thermo(n as f64);
        prop_assert!((b.sbar - a.sbar - delta).abs() < 1e-8 * (1.0 + a.sbar.abs()));
        prop_assert!((b.cbar - a.cbar).abs() < 1e-6);
        prop_assert!((b.ubar - a.ubar).abs() < 1e-9 * (1.0 + a.ubar.abs()));
    }

    // both lattice sums give the same z, which is periodic in the statistic
    #[test]
    fn lattice_sum_consistency(t in -3.0f64..3.0, n in 4.0f64..150.0) {
        let d = theta_log_z(t, n, ThetaMode::Direct);
        let r = theta_log_z(t, n, ThetaMode::Resummed);
        let shifted = theta_log_z(t + 1.0, n, ThetaMode::Direct);
        prop_assert!((d - r).abs() < 1e-9, "{d} vs {r}");
        prop_assert!((d - shifted).abs() < 1e-9);
    }

    #[test]
    fn posteriors_sum_to_one(logs in prop::collection::vec(-700.0f64..50.0, 1..8)) {
        let p = posteriors_from_log_evidence(&logs).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    // same seed, same bits; a different seed moves the estimate
    #[test]
    fn disorder_average_is_deterministic(seed in 0u64..1_000_000, n in 2u32..40) {
        let model = NormalMeanFlat { d: 1, sigma: 1.0 };
        let theta = Theta0::Fixed(ParamPoint::continuous(vec![0.3]));
        let opts = ThermoOptions { replicates: 50, seed, ..Default::default() };
        let a = disorder_average(&model, &Prior::flat(), &theta, n as f64, &opts).unwrap();
        let b = disorder_average(&model, &Prior::flat(), &theta, n as f64, &opts).unwrap();
        prop_assert_eq!(&a, &b);
        let c = disorder_average(&model, &Prior::flat(), &theta, n as f64, &ThermoOptions { seed: seed + 1, ..opts }).unwrap();
        prop_assert!(a.g != c.g);
    }
}

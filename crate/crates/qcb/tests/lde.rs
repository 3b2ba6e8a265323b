//! Canonical-parameter fitting under measurement noise, and the
//! temperature scales it feeds.

use rand_distr::{Distribution, Normal};

use qcb::lde::{critical_temperature, fit_canonical_params, temperature_grid, CanonicalParams, SampleKind};
use qcb::qstate::concurrence_from_correlator;
use qcb::sample::rng;

/// Worst recovery errors over `draws` fits of noisy correlators:
/// (relative J_can, absolute Φ, absolute η).
fn noisy_recovery(cp: CanonicalParams, noise: f64, draws: usize, seed: u64) -> (f64, f64, f64) {
    let betas: Vec<f64> = temperature_grid(cp.j_can, 12).iter().map(|t| 1.0 / t).collect();
    let normal = Normal::new(0.0, noise).unwrap();
    let mut g = rng(seed);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..draws {
        let samples: Vec<(f64, f64)> = betas.iter().map(|&b| (b, cp.correlator(b) * (1.0 + normal.sample(&mut g)))).collect();
        let f = fit_canonical_params(&samples, SampleKind::Correlator).unwrap().params;
        worst.0 = worst.0.max((f.j_can / cp.j_can - 1.0).abs());
        worst.1 = worst.1.max((f.phi - cp.phi).abs());
        worst.2 = worst.2.max((f.eta - cp.eta).abs());
    }
    worst
}

#[test]
fn fit_recovers_parameters_under_half_percent_noise() {
    for (cp, seed) in [(CanonicalParams::chain_table_row(), 1), (CanonicalParams::square_table_row(), 2)] {
        let (dj, dphi, deta) = noisy_recovery(cp, 0.005, 100, seed);
        assert!(dj < 0.02, "J_can off by {:.2}%", 100.0 * dj);
        assert!(dphi < 0.02 && deta < 0.02, "Φ off by {dphi:e}, η off by {deta:e}");
    }
}

#[test]
fn fit_from_jab_samples_recovers_square_row() {
    let cp = CanonicalParams::square_table_row();
    let samples: Vec<(f64, f64)> = temperature_grid(cp.j_can, 8).iter().map(|t| (1.0 / t, cp.j_ab(1.0 / t).unwrap())).collect();
    let f = fit_canonical_params(&samples, SampleKind::Jab).unwrap();
    assert!((f.params.j_can / cp.j_can - 1.0).abs() < 1e-8);
    assert!((f.params.phi - cp.phi).abs() < 1e-8);
    assert!((f.params.eta - cp.eta).abs() < 1e-8);
}

#[test]
fn concurrence_vanishes_above_critical_temperature() {
    for cp in [CanonicalParams::chain_table_row(), CanonicalParams::square_table_row()] {
        let t = critical_temperature(&cp).unwrap().kt_star.unwrap();
        assert!(concurrence_from_correlator(cp.correlator(1.0 / (0.99 * t))) > 0.0);
        assert_eq!(concurrence_from_correlator(cp.correlator(1.0 / (1.01 * t))), 0.0);
    }
}

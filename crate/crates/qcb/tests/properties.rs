//! Property-based invariants across the finite-dimensional, Gaussian,
//! steady-state and probe-theory layers.

use nalgebra::Matrix4;
use proptest::prelude::*;

use qcb::gaussian::{random_local_symplectic, random_physical_cov, random_symplectic, symplectic_eigenvalues_two_mode, uncertainty_min_eig, TwoModeBlocks};
use qcb::lde::{jab_from_correlator, probe_correlator, probe_state_thermal, CanonicalParams};
use qcb::linalg::{kron, tau_dot_tau};
use qcb::qstate::{concurrence, concurrence_from_correlator, entropies, negativity, partial_trace, werner_state};
use qcb::sample::{density, ginibre, rng, separable_mixture, unitary};
use qcb::stationary::{drift_and_diffusion, lyapunov_residual, lyapunov_solve, spectral_abscissa, stability_check, StationaryParams, SteadyState};
use qcb::{CMat, RMat, Subsystem};

fn to_rmat(m: &Matrix4<f64>) -> RMat {
    RMat::from_iterator(4, 4, m.iter().copied())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn separable_mixtures_have_zero_negativity(seed in any::<u64>(), db in 2usize..=3, terms in 1usize..8) {
        let rho = separable_mixture(&mut rng(seed), 2, db, terms);
        let n = negativity(&rho).unwrap();
        prop_assert!(n.n < 1e-10, "N = {}", n.n);
    }

    #[test]
    fn entropy_triangle(seed in any::<u64>(), da in 2usize..=3, db in 2usize..=3, rank in 1usize..=9) {
        let rho = density(&mut rng(seed), da * db, rank.min(da * db), Some((da, db)));
        let sa = entropies(&partial_trace(&rho, Subsystem::A).unwrap()).vn;
        let sb = entropies(&partial_trace(&rho, Subsystem::B).unwrap()).vn;
        let sab = entropies(&rho).vn;
        prop_assert!(sab <= sa + sb + 1e-10);
        prop_assert!(sab >= (sa - sb).abs() - 1e-10);
    }

    #[test]
    fn entropy_unitary_invariance(seed in any::<u64>(), d in 2usize..=6, rank in 1usize..=6) {
        let mut g = rng(seed);
        let rho = density(&mut g, d, rank.min(d), None);
        let u = unitary(&mut g, d);
        let e1 = entropies(&rho);
        let e2 = entropies(&rho.conjugate(&u).unwrap());
        prop_assert!((e1.vn - e2.vn).abs() < 1e-10);
        prop_assert!((e1.purity - e2.purity).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_preserves_local_averages(seed in any::<u64>(), da in 2usize..=3, db in 2usize..=3) {
        let mut g = rng(seed);
        let rho = density(&mut g, da * db, da * db, Some((da, db)));
        let x = ginibre(&mut g, da, da);
        let o = &x + x.adjoint();
        let lhs = rho.expect(&kron(&o, &CMat::identity(db, db)));
        let rhs = partial_trace(&rho, Subsystem::A).unwrap().expect(&o);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn werner_negativity_boundary(f in -1.0f64..=1.0 / 3.0) {
        let n = negativity(&werner_state(f).unwrap()).unwrap().n;
        if f < -1.0 / 3.0 - 1e-12 {
            prop_assert!(n > 0.0);
        } else if f > -1.0 / 3.0 + 1e-12 {
            prop_assert!(n == 0.0 || n < 1e-15);
        }
    }

    #[test]
    fn concurrence_forms_agree_on_invariant_states(f in -1.0f64..=1.0 / 3.0) {
        // ⟨τ_a·τ_b⟩ = 3f for the rotationally invariant family
        let rho = werner_state(f).unwrap();
        let c = rho.expect(&tau_dot_tau()).re;
        prop_assert!((concurrence(&rho).unwrap() - concurrence_from_correlator(c)).abs() < 1e-10);
    }

    #[test]
    fn concurrence_vanishes_iff_correlator_above_minus_one(c in -3.0f64..=1.0) {
        let ec = concurrence_from_correlator(c);
        prop_assert_eq!(ec == 0.0, c >= -1.0);
    }

    #[test]
    fn symplectic_invariants_under_local_maps(seed in any::<u64>()) {
        let mut g = rng(seed);
        let v = random_physical_cov(&mut g);
        let s = random_local_symplectic(&mut g, 0.8);
        let w = Matrix4::from_iterator((&s * to_rmat(&v) * s.transpose()).iter().copied());
        let (b1, b2) = (TwoModeBlocks::from_cov(&v), TwoModeBlocks::from_cov(&w));
        for (x, y) in [(b1.det_a(), b2.det_a()), (b1.det_b(), b2.det_b()), (b1.det_c(), b2.det_c()), (v.determinant(), w.determinant())] {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn symplectic_conjugation_keeps_physicality(seed in any::<u64>()) {
        let mut g = rng(seed);
        let v = random_physical_cov(&mut g);
        let s = random_symplectic(&mut g, 0.8);
        let w = &s * to_rmat(&v) * s.transpose();
        prop_assert!(uncertainty_min_eig(&w) > -1e-8);
        let (p, m) = symplectic_eigenvalues_two_mode(&Matrix4::from_iterator(w.iter().copied())).unwrap();
        prop_assert!(m >= 0.5 - 1e-8 && p >= m);
    }

    #[test]
    fn routh_hurwitz_matches_spectrum(
        gm in -4.0f64..-1.0, k in -1.0f64..0.5, delta in -3.0f64..3.0, big_g in 0.0f64..1.5,
    ) {
        let p = StationaryParams { omega_m: 1.0, gamma_m: 10f64.powf(gm), kappa: 10f64.powf(k), delta0: 0.0, g: 1e-3, drive_e: 1.0, n_bar: 1.0 };
        let s = SteadyState { alpha_s: 0.0, q_s: 0.0, p_s: 0.0, delta, big_g };
        let st = stability_check(&p, &s);
        let (a, d) = drift_and_diffusion(&p, &s);
        let a = to_rmat(&a);
        let abscissa = spectral_abscissa(&a);
        prop_assume!(abscissa.abs() > 1e-9);
        prop_assert_eq!(st.stable, abscissa < 0.0);
        if st.stable {
            let v = lyapunov_solve(&a, &to_rmat(&d)).unwrap();
            prop_assert!(lyapunov_residual(&a, &v, &to_rmat(&d)) < 1e-10);
            prop_assert!(uncertainty_min_eig(&v) > -1e-8);
        }
    }

    #[test]
    fn canonical_correlator_monotone(j in 1e-4f64..1e-1, phi in 0.0f64..0.5, eta in -0.05f64..0.05, b in 0.1f64..50.0) {
        prop_assume!(eta + 3.0 * phi >= 0.0);
        let cp = CanonicalParams::new(j, phi, eta).unwrap();
        let (b1, b2) = (b / j, 1.1 * b / j);
        prop_assert!(cp.correlator(b2) <= cp.correlator(b1) + 1e-14);
    }

    #[test]
    fn canonical_round_trip(j in 1e-4f64..1e-1, phi in 0.0f64..0.5, eta in -0.05f64..0.05, b in 0.05f64..20.0) {
        prop_assume!(eta + 3.0 * phi >= 0.0);
        let cp = CanonicalParams::new(j, phi, eta).unwrap();
        let beta = b / j;
        let jab = cp.j_ab(beta).unwrap();
        let rho = probe_state_thermal(jab, beta).unwrap();
        let c = rho.expect(&tau_dot_tau()).re;
        prop_assert!((c - cp.correlator(beta)).abs() < 1e-10, "{} vs {}", c, cp.correlator(beta));
        prop_assert!((probe_correlator(jab, beta) - c).abs() < 1e-10);
        let back = jab_from_correlator(c, beta).unwrap();
        prop_assert!((back - jab).abs() <= 1e-8 * jab.abs().max(j));
    }
}

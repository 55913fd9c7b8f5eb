mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use dissipator::geometry::{
    best_lower_bound, bound_from_omega, lemma52_certificate, omega, phi, phi_inv, psi_lower_bound, Order,
    LEMMA52_CONSTANT,
};
use dissipator::quadrature::GaussLegendre;
use dissipator::ShearProfile;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_profile(rng: &mut ChaCha8Rng, max_terms: usize) -> ShearProfile {
    let n = rng.gen_range(1..=max_terms);
    match rng.gen_range(0..3) {
        0 => ShearProfile::weierstrass_power(rng.gen_range(0.05..0.95), n).unwrap(),
        1 => ShearProfile::weierstrass_log(rng.gen_range(1.05..1.95), n).unwrap(),
        _ => ShearProfile::explicit((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.0).unwrap(),
    }
}

/// Root of φ(x) = v by plain bisection on [0, π/2).
fn bisect_phi_inv(v: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 36.0 * mid * mid.tan() < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn phi_examples() {
    assert_eq!(phi(0.0).unwrap(), 0.0);
    assert!((phi(PI / 4.0).unwrap() - 9.0 * PI).abs() <= 1e-12 * 9.0 * PI);
    assert!((phi(PI / 6.0).unwrap() - 2.0 * PI * 3f64.sqrt()).abs() < 1e-12);
    assert!((phi(PI / 6.0).unwrap() - 10.8828).abs() < 1e-4);
    assert!(phi(-0.1).is_err());
    assert!(phi(2.0).is_err());

    assert_eq!(phi_inv(0.0).unwrap(), 0.0);
    assert!((phi_inv(9.0 * PI).unwrap() - PI / 4.0).abs() < 1e-15);
    let x = phi_inv(1.0).unwrap();
    assert!((x - bisect_phi_inv(1.0)).abs() < 1e-14);
    assert!((0.16..0.17).contains(&x));
    assert!((phi(x).unwrap() - 1.0).abs() < 1e-12);
    assert!(phi_inv(-1.0).is_err());
    assert!(phi_inv(f64::NAN).is_err());
}

#[test]
fn phi_inverse_round_trip_on_0_to_1e6() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: (f64, f64) = (0.0, 0.0);
    for i in 0..20_000 {
        // Half the samples log-uniform, half uniform, so both ends are covered.
        let v = if i % 2 == 0 {
            10f64.powf(rng.gen_range(-8.0..6.0))
        } else {
            rng.gen_range(0.0..1e6)
        };
        let back = phi(phi_inv(v).unwrap()).unwrap();
        let rel = (back - v).abs() / v.max(f64::MIN_POSITIVE);
        if rel > worst.0 {
            worst = (rel, v);
        }
    }
    assert!(worst.0 <= 1e-12, "worst relative error {:.3e} at v = {:.6e}", worst.0, worst.1);
}

#[test]
fn phi_inverse_is_best_float_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut vs: Vec<f64> = (0..5000).map(|_| 10f64.powf(rng.gen_range(-8.0..6.0))).collect();
    vs.sort_by(f64::total_cmp);
    let mut prev = 0.0;
    for &v in &vs {
        let x = phi_inv(v).unwrap();
        assert!(x >= prev, "not monotone at {v}");
        prev = x;
        let err = |y: f64| (36.0 * y * y.tan() - v).abs();
        assert!(err(x) <= err(x.next_up()) && err(x) <= err(x.next_down()), "v = {v}");
    }
}

#[test]
fn omega_examples() {
    let zero = ShearProfile::explicit(vec![], 0.0).unwrap();
    assert_eq!(omega(&zero, 0.5, Order::Constant).unwrap().value, 0.0);
    assert_eq!(psi_lower_bound(&zero, 1.0, Order::Constant).unwrap().bound, 0.0);

    let p = ShearProfile::weierstrass_power(0.5, 4).unwrap().with_mean(1.0).unwrap();
    assert!(omega(&p, 0.3, Order::Constant).is_err());
    assert!(omega(&p, 0.0, Order::Affine).is_err());
    assert!(omega(&p, f64::NAN, Order::Affine).is_err());
}

#[test]
fn omega1_matches_brute_force_oracle() {
    let p = ShearProfile::weierstrass_power(0.5, 6).unwrap();
    let delta = PI / 9.0;
    let fit = omega(&p, delta, Order::Affine).unwrap();
    let brute = common::brute_omega(&p, delta, true, 10_000);
    assert!((fit.value - brute).abs() <= 1e-6 * brute, "{} vs {brute}", fit.value);

    let b = psi_lower_bound(&p, delta, Order::Affine).unwrap();
    let x = phi_inv(delta * brute).unwrap();
    let want = (x / delta).powi(2);
    assert!((b.bound - want).abs() <= 1e-6 * want);
}

#[test]
fn closed_form_window_matches_quadrature() {
    let rule = GaussLegendre::new(2048);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let p = random_profile(&mut rng, 6);
        let delta = 10f64.powf(rng.gen_range(-3.0..0.5));
        for order in [Order::Constant, Order::Affine] {
            let fit = omega(&p, delta, order).unwrap();
            let q = common::window_residual(&p, &rule, fit.x_star, delta, order == Order::Affine);
            assert!(
                (fit.value - q).abs() <= 1e-9 * q.max(1e-300),
                "{order:?} δ={delta}: {} vs {q}",
                fit.value
            );
        }
    }
}

#[test]
fn monotone_in_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let p = random_profile(&mut rng, 5);
        for _ in 0..10 {
            let a = 10f64.powf(rng.gen_range(-2.5..0.5));
            let b = 10f64.powf(rng.gen_range(-2.5..0.5));
            let (d1, d2) = (a.min(b), a.max(b));
            for order in [Order::Constant, Order::Affine] {
                let w1 = omega(&p, d1, order).unwrap().value;
                let w2 = omega(&p, d2, order).unwrap().value;
                assert!(w1 <= w2 * (1.0 + 1e-12), "{order:?} δ₁={d1} δ₂={d2}: {w1} > {w2}");
            }
        }
    }
}

#[test]
fn affine_fit_never_worse_than_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let p = random_profile(&mut rng, 5);
        let d = 10f64.powf(rng.gen_range(-2.5..0.5));
        let w0 = omega(&p, d, Order::Constant).unwrap().value;
        let w1 = omega(&p, d, Order::Affine).unwrap().value;
        assert!(w1 <= w0 * (1.0 + 1e-12), "δ={d}: {w1} > {w0}");
    }
}

#[test]
fn best_lower_bound_examples() {
    let p = ShearProfile::weierstrass_power(0.5, 5).unwrap();
    let single = psi_lower_bound(&p, 0.2, Order::Affine).unwrap();
    assert_eq!(best_lower_bound(&p, &[0.2], Order::Affine).unwrap(), single);
    assert_eq!(best_lower_bound(&p, &[0.2, 0.2], Order::Affine).unwrap(), single);
    assert!(best_lower_bound(&p, &[], Order::Affine).is_err());

    let (w1, w2) = (1.0, 2.0);
    assert!(bound_from_omega(0.3, w1).unwrap().bound <= bound_from_omega(0.3, w2).unwrap().bound);
}

#[test]
fn optimal_delta_tracks_balance_scale() {
    // For (k/ν)·u the best δ on a geometric grid sits within a constant
    // factor of (ν/|k|)^{1/(α+2)}.
    let alpha = 0.5;
    let p = ShearProfile::weierstrass_power(alpha, 6).unwrap();
    for nu in [1e-3, 1e-2] {
        let s = 1.0 / nu;
        let q = p.scaled(s);
        let grid: Vec<f64> = (0..=48).map(|j| PI * 3f64.powf(-6.0 * j as f64 / 48.0)).collect();
        let best = best_lower_bound(&q, &grid, Order::Affine).unwrap();
        let dp = nu.powf(1.0 / (alpha + 2.0));
        let r = best.delta / dp;
        assert!((0.1..=10.0).contains(&r), "ν={nu}: δ*/δ_nom = {r}");
    }
}

#[test]
fn lemma52_holds_for_m_1_to_5() {
    let p = ShearProfile::weierstrass_power(0.5, 8).unwrap();
    for m in 1..=5 {
        let c = lemma52_certificate(&p, m).unwrap();
        let want_rhs = LEMMA52_CONSTANT * 3f64.powi(-3 * m as i32) * p.coeffs()[m - 1].powi(2);
        assert!((c.rhs - want_rhs).abs() <= 1e-15 * want_rhs);
        assert!((c.delta - PI * 3f64.powi(-(m as i32))).abs() < 1e-15);
        assert!(c.pass && c.lhs > c.rhs, "m = {m}");
    }
    let q = p.scaled(2.0);
    let (a, b) = (lemma52_certificate(&p, 2).unwrap(), lemma52_certificate(&q, 2).unwrap());
    assert!((b.lhs - 4.0 * a.lhs).abs() <= 1e-10 * b.lhs);
    assert!((b.rhs - 4.0 * a.rhs).abs() <= 1e-14 * b.rhs);
    assert!(lemma52_certificate(&p, 0).is_err());
    assert!(lemma52_certificate(&p, 9).is_err());
}

fn small_profile() -> impl Strategy<Value = ShearProfile> {
    prop_oneof![
        (0.05f64..0.95, 1usize..=5).prop_map(|(a, n)| ShearProfile::weierstrass_power(a, n).unwrap()),
        (1.05f64..1.95, 1usize..=5).prop_map(|(a, n)| ShearProfile::weierstrass_log(a, n).unwrap()),
        prop::collection::vec(-1.0f64..1.0, 1..=4).prop_map(|c| ShearProfile::explicit(c, 0.0).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn omega_homogeneous_degree_two(p in small_profile(), ld in -2.5f64..0.4, a in -50.0f64..50.0) {
        prop_assume!(a.abs() > 1e-3);
        let d = 10f64.powf(ld);
        for order in [Order::Constant, Order::Affine] {
            let w = omega(&p, d, order).unwrap().value;
            let wa = omega(&p.scaled(a), d, order).unwrap().value;
            prop_assert!((wa - a * a * w).abs() <= 1e-10 * (a * a * w).max(1e-300));
        }
    }

    #[test]
    fn omega1_shift_invariant(p in small_profile(), ld in -2.5f64..0.4, c in -20.0f64..20.0) {
        let d = 10f64.powf(ld);
        let w = omega(&p, d, Order::Affine).unwrap().value;
        let q = p.clone().with_mean(c).unwrap();
        let wc = omega(&q, d, Order::Affine).unwrap().value;
        prop_assert!((wc - w).abs() <= 1e-10 * w.max(1e-300));
    }
}

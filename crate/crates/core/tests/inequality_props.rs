use chks_core::potentials::{
    beta, beta_prime, check_sqrt_lipschitz, fenchel_gap, gamma, gamma_hat, half_exp_bregman, potential,
    relative_entropy_density, AlphaSpec,
};
use proptest::prelude::*;

const OPEN: std::ops::Range<f64> = -0.999_999..0.999_999;

fn conc() -> impl Strategy<Value = f64> {
    (-12.0f64..12.0).prop_map(f64::exp)
}

proptest! {
    #[test]
    fn beta_secant_slope_at_least_two(a in OPEN, b in OPEN) {
        prop_assume!((a - b).abs() > 1e-9);
        let slope = (beta(b).unwrap() - beta(a).unwrap()) / (b - a);
        prop_assert!(slope >= 2.0 * (1.0 - 1e-9));
        prop_assert!(beta_prime(a).unwrap() >= 2.0);
    }

    #[test]
    fn lambda_shifted_potential_is_convex(a in OPEN, b in OPEN, t in 0.0f64..1.0, lambda in 0.0f64..5.0) {
        let g = |r: f64| potential(r, lambda).unwrap() + 0.5 * lambda * r * r;
        let x = t * a + (1.0 - t) * b;
        let chord = t * g(a) + (1.0 - t) * g(b);
        prop_assert!(g(x) <= chord + 1e-14 * (1.0 + chord.abs()));
    }

    #[test]
    fn gamma_hat_has_derivative_gamma(r in -30.0f64..10.0) {
        let h = 1e-6;
        prop_assume!(r.abs() > 10.0 * h);
        let fd = (gamma_hat(r + h) - gamma_hat(r - h)) / (2.0 * h);
        prop_assert!((fd - gamma(r)).abs() <= 1e-6);
        prop_assert!(gamma_hat(r) >= 0.0);
    }

    #[test]
    fn kl_density_nonnegative(s in conc(), r in conc()) {
        prop_assert!(relative_entropy_density(s, r) >= 0.0);
    }

    #[test]
    fn sqrt_difference_chain(s in conc(), r in conc(), p in OPEN, q in OPEN) {
        let kl = relative_entropy_density(s, r);
        let root = (s - r) / (s.sqrt() + r.sqrt());
        prop_assert!(root * root <= kl + 64.0 * f64::EPSILON * (kl + root * root));
        let u = (s.ln(), r.ln());
        prop_assert!(half_exp_bregman(u.0, u.1) >= 0.0);
        let lhs = (s - r) * (p - q);
        let rhs = 4.0 * (r * (p - q) * (p - q) + kl);
        prop_assert!(lhs <= rhs + 64.0 * f64::EPSILON * (lhs.abs() + rhs.abs()));
    }

    #[test]
    fn fenchel_young_gap_nonnegative(rad in 0.05f64..20.0, a in -1.0f64..1.0, b in -1.0f64..1.0, s in conc(), r in conc()) {
        let (w, wr) = (0.999 * a * rad, 0.999 * b * rad);
        let gap = fenchel_gap(rad, w, wr, s, r).unwrap();
        let k = (4.0 * rad).recip().max(4.0 * rad);
        let scale = k * (r * (w - wr).powi(2) + relative_entropy_density(s, r)) + ((w - wr) * (s - r)).abs();
        prop_assert!(gap >= -64.0 * f64::EPSILON * scale);
    }

    #[test]
    fn young_absorption(chi in 0.0f64..5.0, st in conc(), a in -10.0f64..10.0, b in -10.0f64..10.0, extra in 1.0f64..3.0) {
        let m = extra * 1f64.max(chi * chi * st);
        let full = st * a * a - chi * st * a * b + m * b * b;
        let absorbed = 0.5 * st * a * a + 0.5 * m * b * b;
        prop_assert!(full - absorbed >= -64.0 * f64::EPSILON * (st * a * a + m * b * b + (chi * st * a * b).abs()));
    }
}

#[test]
fn equality_cases_and_hand_values() {
    assert_eq!(relative_entropy_density(2.5, 2.5), 0.0);
    assert_eq!(half_exp_bregman(0.7, 0.7), 0.0);
    // (√4 - 1)² = 1 ≤ 4 - 1 - ln 4
    let kl = relative_entropy_density(4.0, 1.0);
    assert!((kl - (3.0 - 4f64.ln())).abs() < 1e-15);
    assert!(1.0 <= kl);
}

#[test]
fn logistic_rate_is_sqrt_lipschitz() {
    let alpha = AlphaSpec::logistic(1.0, 0.5).unwrap();
    let rep = check_sqrt_lipschitz(|s| alpha.eval(-0.4, s).unwrap(), 25.0, 50_000, 3);
    // |h| ≤ 1 and |1 - √θ - (1 - √η)| = |√θ - √η|.
    assert!(rep.all_finite);
    assert!(rep.lipschitz <= 1.0 + 1e-12, "{}", rep.lipschitz);
}

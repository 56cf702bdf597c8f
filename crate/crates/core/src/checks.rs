//! The invariant battery behind `chks check`: grid identities, potential
//! lemmas, finite-difference variational checks, and the pointwise
//! inequality suite. Every check is named and reports a one-line detail.
//!
//! [`Mutation`] injects known faults so the battery can be shown to catch
//! them; it never touches the solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::functionals::variational_check;
use crate::grid::{div, face_inner, grad, inner, integrate, inv_neumann_laplacian, laplacian, FaceField, Field, GridSpec};
use crate::initial::{PhiInit, SigmaInit};
use crate::model::ModelParams;
use crate::potentials::{
    beta, check_sqrt_lipschitz, gamma, gamma_hat, potential, potential_convex, relative_entropy_density, AlphaSpec,
};
use crate::wsu::pointwise_inequality_suite;

/// Deliberate faults for mutation testing of the battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Use `-β` wherever the battery evaluates `β` analytically.
    BetaSignFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Tuples per pointwise inequality.
    pub inequality_samples: usize,
    pub seed: u64,
    pub mutation: Option<Mutation>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { inequality_samples: 1_000_000, seed: 20_240_601, mutation: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn verdict(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.to_string(), passed, detail }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => verdict(name, passed, detail),
        Err(e) => verdict(name, false, format!("error: {e}")),
    }
}

fn test_grids() -> Vec<GridSpec<f64>> {
    vec![GridSpec::new_1d(37, 2.3).expect("grid"), GridSpec::new_2d(9, 7, 1.5, 0.8).expect("grid")]
}

fn random_field(grid: GridSpec<f64>, rng: &mut ChaCha8Rng) -> Field<f64> {
    Field::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0))
}

fn grid_checks(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let (mut sbp, mut cons, mut inv) = (0.0f64, 0.0f64, 0.0f64);
    let mut failure = None;
    for g in test_grids() {
        for _ in 0..20 {
            let u = random_field(g, rng);
            let v = random_field(g, rng);
            // ⟨Δu, v⟩ = -⟨∇u, ∇v⟩
            let lhs = inner(&laplacian(&u), &v);
            let rhs = -face_inner(&grad(&u), &grad(&v));
            sbp = sbp.max((lhs - rhs).abs() / (1.0 + lhs.abs()));

            let flux: Vec<f64> = (0..g.num_faces()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let flux = FaceField::from_values(g, flux).expect("face count");
            cons = cons.max(integrate(&div(&flux)).abs());

            let f = u.centered();
            match inv_neumann_laplacian(&f) {
                Ok(w) => {
                    let back = laplacian(&w).scaled(-1.0);
                    inv = inv.max(back.sub(&f).max_abs() / f.max_abs());
                }
                Err(e) => failure = Some(e.to_string()),
            }
        }
    }
    out.push(verdict("grid.summation_by_parts", sbp < 1e-12, format!("max relative defect {sbp:.2e}")));
    out.push(verdict("grid.divergence_conservation", cons < 1e-12, format!("max |∫div F| {cons:.2e}")));
    out.push(match failure {
        Some(e) => verdict("grid.inverse_laplacian_roundtrip", false, format!("error: {e}")),
        None => verdict("grid.inverse_laplacian_roundtrip", inv < 1e-8, format!("max relative defect {inv:.2e}")),
    });
    out
}

fn potential_checks(rng: &mut ChaCha8Rng, mutation: Option<Mutation>) -> Vec<CheckResult> {
    let sign = if mutation == Some(Mutation::BetaSignFlip) { -1.0 } else { 1.0 };
    let beta_m = |r: f64| beta(r).map(|b| sign * b);
    let mut out = Vec::new();

    out.push(guarded("potentials.beta_slope_at_least_two", || {
        let mut worst = f64::INFINITY;
        for _ in 0..100_000 {
            let a: f64 = rng.gen_range(-0.999..0.999);
            let b = rng.gen_range(-0.999..0.999);
            if (a - b).abs() < 1e-6 {
                continue;
            }
            worst = worst.min((beta_m(b)? - beta_m(a)?) / (b - a));
        }
        Ok((worst >= 2.0 - 1e-9, format!("min secant slope {worst:.6}")))
    }));

    out.push(guarded("potentials.derivative_consistency", || {
        let h = 1e-6;
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let r = rng.gen_range(-0.99..0.99);
            let lambda = rng.gen_range(0.0..3.0);
            let fd = (potential(r + h, lambda)? - potential(r - h, lambda)?) / (2.0 * h);
            let exact = beta_m(r)? - lambda * r;
            worst = worst.max((fd - exact).abs() / (1.0 + exact.abs()));
        }
        Ok((worst < 1e-6, format!("max relative FD error {worst:.2e}")))
    }));

    out.push(guarded("potentials.lambda_convexity", || {
        let mut worst = f64::INFINITY;
        for _ in 0..100_000 {
            let a = rng.gen_range(-0.999..0.999);
            let b = rng.gen_range(-0.999..0.999);
            let lambda = rng.gen_range(0.0..3.0);
            let g = |r: f64| -> Result<f64> { Ok(potential(r, lambda)? + 0.5 * lambda * r * r) };
            let mid = g(0.5 * (a + b))?;
            let chord = 0.5 * (g(a)? + g(b)?);
            worst = worst.min((chord - mid) / (1.0 + chord.abs()));
        }
        Ok((worst >= -1e-14, format!("min midpoint gap {worst:.2e}")))
    }));

    out.push(guarded("potentials.convex_part_minimum", || {
        // The convex part is even with its minimum 0 at r = 0.
        let mut worst = f64::INFINITY;
        for _ in 0..10_000 {
            let r: f64 = rng.gen_range(-0.999..0.999);
            let v = potential_convex(r)?;
            worst = worst.min(v);
            if (v - potential_convex(-r)?).abs() > 1e-14 {
                return Ok((false, format!("asymmetric at r = {r}")));
            }
        }
        Ok((worst >= 0.0, format!("min value {worst:.2e}")))
    }));

    out.push(guarded("potentials.gamma_hat_derivative", || {
        let h = 1e-6;
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let r: f64 = rng.gen_range(-20.0..5.0);
            if r.abs() < 10.0 * h {
                continue;
            }
            let fd = (gamma_hat(r + h) - gamma_hat(r - h)) / (2.0 * h);
            worst = worst.max((fd - gamma(r)).abs());
        }
        Ok((worst < 1e-6, format!("max FD error {worst:.2e}")))
    }));

    out.push(guarded("potentials.kl_nonnegative", || {
        let mut worst = f64::INFINITY;
        for _ in 0..100_000 {
            let s = rng.gen_range(-15.0f64..15.0).exp();
            let r = rng.gen_range(-15.0f64..15.0).exp();
            worst = worst.min(relative_entropy_density(s, r));
        }
        Ok((worst >= 0.0, format!("min density {worst:.2e}")))
    }));

    out.push(guarded("potentials.alpha_sqrt_lipschitz", || {
        let alpha = AlphaSpec::logistic(1.0, 1.0)?;
        let cap = 10.0;
        let rep = check_sqrt_lipschitz(|s| alpha.eval(0.3, s).unwrap_or(f64::NAN), cap, 100_000, 11);
        // For h(φ)(1 - σ) on [0, cap] with |h| ≤ 1: |Δf| ≤ |Δσ| ≤ 2√cap |Δ√σ|.
        let bound = 2.0 * cap.sqrt();
        let ok = rep.all_finite && rep.lipschitz <= bound;
        Ok((ok, format!("lipschitz {:.3} (bound {bound:.3}), growth {:.3}", rep.lipschitz, rep.growth)))
    }));
    out
}

fn variational_checks(rng: &mut ChaCha8Rng) -> CheckResult {
    guarded("functionals.variational_consistency", || {
        let mut worst = 0.0f64;
        for k in 0..10u64 {
            let grid = if k % 2 == 0 {
                GridSpec::new_1d(24, rng.gen_range(0.5..4.0))?
            } else {
                GridSpec::new_2d(7, 6, rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0))?
            };
            let phi = PhiInit::RandomPerturbation {
                mean: rng.gen_range(-0.3..0.3),
                amplitude: rng.gen_range(0.1..0.6),
                seed: rng.gen(),
            }
            .sample(&grid)?;
            let sigma = SigmaInit::RandomPositive { seed: rng.gen(), floor: rng.gen_range(0.05..1.0) }.sample(&grid)?;
            let params = ModelParams::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), AlphaSpec::Constant(0.0))
                .with_epsilon(if k % 3 == 0 { 0.0 } else { rng.gen_range(0.0..0.5) });
            let c = variational_check(&phi, &sigma, &params, 1e-5)?;
            worst = worst.max(c.phi_rel_error).max(c.sigma_rel_error);
        }
        Ok((worst < 1e-6, format!("max relative error {worst:.2e} over 10 states")))
    })
}

/// Runs the full battery.
pub fn run_checks(opts: &CheckOptions) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = grid_checks(&mut rng);
    out.extend(potential_checks(&mut rng, opts.mutation));
    out.push(variational_checks(&mut rng));
    for rep in pointwise_inequality_suite::<f64>(opts.inequality_samples, opts.seed ^ 0x9e37_79b9) {
        let detail = match &rep.first_violation {
            Some(t) => format!("{} of {} violated, first at {t:?}", rep.violations, rep.samples),
            None => format!("{} samples, worst scaled margin {:.2e}", rep.samples, rep.worst_margin),
        };
        out.push(verdict(&format!("inequalities.{}", rep.name), rep.violations == 0, detail));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mutation: Option<Mutation>) -> Vec<CheckResult> {
        run_checks(&CheckOptions { inequality_samples: 2_000, seed: 5, mutation })
    }

    #[test]
    fn pristine_battery_passes() {
        let res = quick(None);
        for r in &res {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(res.len() >= 15);
    }

    #[test]
    fn beta_sign_flip_is_caught() {
        let failed: Vec<String> = quick(Some(Mutation::BetaSignFlip)).into_iter().filter(|r| !r.passed).map(|r| r.name).collect();
        assert!(failed.contains(&"potentials.beta_slope_at_least_two".to_string()), "{failed:?}");
        assert!(failed.contains(&"potentials.derivative_consistency".to_string()));
    }
}

//! Discrete counterparts of the conservation laws, the energy-dissipation law
//! and the integrated entropy identity, evaluated on consecutive accepted
//! states. All space integrals use the new time level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functionals::{check_positive, face_mobility, nutrient_potential, EnergyReport};
use crate::grid::{face_inner, grad, inner, integrate, Field, GridSpec};
use crate::model::ModelParams;
use crate::scalar::{ordered_sum, Real};
use crate::solver::nutrient::reaction_coefficients;

/// `[Eⁿ⁺¹ - Eⁿ]/τ + Dⁿ⁺¹ - ∫ α σ (ln σ + ε(σ - 1) + χ(1 - φ))`.
pub fn energy_law_residual<T: Real>(
    e_prev: T,
    next: &EnergyReport<T>,
    phi_next: &Field<T>,
    sigma_next: &Field<T>,
    params: &ModelParams<T>,
    dt: T,
) -> Result<T> {
    let q = nutrient_potential(phi_next, sigma_next, params.chi, params.epsilon)?;
    let mut src = Vec::with_capacity(q.len());
    for ((&p, &s), &qv) in phi_next.values().iter().zip(sigma_next.values()).zip(q.values()) {
        src.push(params.alpha.eval(p, s)? * s * qv);
    }
    let source = ordered_sum(src) * phi_next.grid().cell_volume();
    Ok((next.e_total - e_prev) / dt + next.dissipation - source)
}

/// `| [∫ln σⁿ⁺¹ - ∫ln σⁿ]/τ - (∫|∇ln σ|² - χ ∫ m ∇ln σ·∇φ + ∫α) |` at level `n+1`,
/// `m = 1/(1 + εσ)` at faces.
pub fn entropy_identity_residual<T: Real>(
    sigma_prev: &Field<T>,
    sigma_next: &Field<T>,
    phi_next: &Field<T>,
    params: &ModelParams<T>,
    dt: T,
) -> Result<T> {
    check_positive(sigma_prev)?;
    check_positive(sigma_next)?;
    let grid = *sigma_next.grid();
    let l_prev = sigma_prev.map(|s| s.ln());
    let l_next = sigma_next.map(|s| s.ln());
    let gl = grad(&l_next);
    let gp = grad(phi_next);
    let s = sigma_next.values();
    let cross = ordered_sum(grid.faces().zip(gl.values()).zip(gp.values()).map(|((f, &a), &b)| {
        let m = T::one() / (T::one() + params.epsilon * T::half() * (s[f.left] + s[f.right]));
        m * a * b
    })) * grid.cell_volume();
    let mut alpha = Vec::with_capacity(s.len());
    for (&p, &x) in phi_next.values().iter().zip(s) {
        alpha.push(params.alpha.eval(p, x)?);
    }
    let lhs = (integrate(&l_next) - integrate(&l_prev)) / dt;
    let rhs = face_inner(&gl, &gl) - params.chi * cross + ordered_sum(alpha) * grid.cell_volume();
    Ok((lhs - rhs).abs())
}

/// Cellwise reaction source the nutrient step integrates:
/// `α₋ σⁿ⁺¹ + α₊ σⁿ` (sign split) or `α σⁿ⁺¹` (implicit).
pub fn scheme_reaction<T: Real>(
    sigma_prev: &Field<T>,
    sigma_next: &Field<T>,
    phi_next: &Field<T>,
    params: &ModelParams<T>,
) -> Result<Field<T>> {
    let (imp, exp) = reaction_coefficients(sigma_prev, phi_next, params)?;
    let p = sigma_prev.values();
    sigma_next.try_map(|i, s| Ok(imp[i] * s + exp[i] * p[i]))
}

/// Fixed set of smooth test functions for the weak residuals.
#[derive(Debug, Clone)]
pub struct TestBattery<T> {
    pub fields: Vec<(String, Field<T>)>,
}

impl<T: Real> TestBattery<T> {
    /// Revision of [`TestBattery::standard`]; bump when its members change.
    pub const VERSION: u32 = 1;
    const SEED: u64 = 0x5eed_0001;

    /// Constant, normalized coordinate monomials up to degree two, and one
    /// seeded random cosine sum.
    pub fn standard(grid: &GridSpec<T>) -> Self {
        let lens = grid.lengths();
        let lx = lens[0];
        let ly = if grid.dim() == 2 { lens[1] } else { T::one() };
        let mut fields = vec![
            ("one".to_string(), Field::constant(*grid, T::one())),
            ("x".to_string(), Field::from_fn(*grid, |x, _| x / lx)),
            ("x2".to_string(), Field::from_fn(*grid, |x, _| (x / lx) * (x / lx))),
        ];
        if grid.dim() == 2 {
            fields.push(("y".to_string(), Field::from_fn(*grid, |_, y| y / ly)));
            fields.push(("xy".to_string(), Field::from_fn(*grid, |x, y| (x / lx) * (y / ly))));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(Self::SEED);
        let modes: Vec<(f64, f64, f64)> =
            (0..6).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64)).collect();
        let pi = T::PI();
        fields.push((
            "random".to_string(),
            Field::from_fn(*grid, |x, y| {
                ordered_sum(modes.iter().map(|&(a, kx, ky)| {
                    T::lit(a) * (T::lit(kx) * pi * x / lx).cos() * (T::lit(ky) * pi * y / ly).cos()
                }))
            }),
        ));
        Self { fields }
    }
}

/// Weak residuals of both equations against one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakRow<T> {
    pub test: String,
    /// `|⟨(φⁿ⁺¹ - φⁿ)/τ, ψ⟩ + ⟨∇μ, ∇ψ⟩|`
    pub phi: T,
    /// `|⟨(σⁿ⁺¹ - σⁿ)/τ, ψ⟩ + ⟨σ̄ ∇μ_σ, ∇ψ⟩ - ⟨reaction, ψ⟩|`
    pub sigma: T,
}

/// Weak-form residual table for one step. `mu` should be the potential the
/// step solved with.
pub fn weak_residuals<T: Real>(
    phi_prev: &Field<T>,
    sigma_prev: &Field<T>,
    phi_next: &Field<T>,
    sigma_next: &Field<T>,
    mu: &Field<T>,
    dt: T,
    params: &ModelParams<T>,
    battery: &TestBattery<T>,
) -> Result<Vec<WeakRow<T>>> {
    let dphi = phi_next.sub(phi_prev).scaled(dt.recip());
    let dsig = sigma_next.sub(sigma_prev).scaled(dt.recip());
    let gmu = grad(mu);
    let q = nutrient_potential(phi_next, sigma_next, params.chi, params.epsilon)?;
    let mob = face_mobility(sigma_next, params.epsilon);
    let mut flux = grad(&q);
    for (v, m) in flux.values_mut().iter_mut().zip(&mob) {
        *v = *v * *m;
    }
    let reaction = scheme_reaction(sigma_prev, sigma_next, phi_next, params)?;
    battery
        .fields
        .iter()
        .map(|(name, psi)| {
            let gpsi = grad(psi);
            Ok(WeakRow {
                test: name.clone(),
                phi: (inner(&dphi, psi) + face_inner(&gmu, &gpsi)).abs(),
                sigma: (inner(&dsig, psi) + face_inner(&flux, &gpsi) - inner(&reaction, psi)).abs(),
            })
        })
        .collect()
}

/// Running integrals and suprema along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Trackers<T> {
    /// `∫₀ᵗ ∫|∇ ln σ|²`, nondecreasing.
    pub zeta: T,
    /// `∫₀ᵗ ∫ σ(ln σ - 1) + 1`.
    pub z: T,
    pub sup_llogl_beta: T,
    pub sup_gamma_hat_ln_sigma: T,
    pub sup_ln_sigma_l1: T,
}

impl<T: Real> Trackers<T> {
    pub fn start(report: &EnergyReport<T>) -> Self {
        Self {
            zeta: T::zero(),
            z: T::zero(),
            sup_llogl_beta: report.llogl_beta,
            sup_gamma_hat_ln_sigma: report.gamma_hat_ln_sigma,
            sup_ln_sigma_l1: report.ln_sigma_l1,
        }
    }

    /// Advances by one implicit step ending at `report`.
    pub fn advance(&mut self, report: &EnergyReport<T>, dt: T) -> Result<()> {
        self.zeta = self.zeta + dt * report.grad_ln_sigma_sq;
        self.z = self.z + dt * report.entropy_excess;
        self.sup_llogl_beta = self.sup_llogl_beta.max(report.llogl_beta);
        self.sup_gamma_hat_ln_sigma = self.sup_gamma_hat_ln_sigma.max(report.gamma_hat_ln_sigma);
        self.sup_ln_sigma_l1 = self.sup_ln_sigma_l1.max(report.ln_sigma_l1);
        let all = [self.zeta, self.z, self.sup_llogl_beta, self.sup_gamma_hat_ln_sigma, self.sup_ln_sigma_l1];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("non-finite tracked integral".into()));
        }
        Ok(())
    }
}

/// Hard per-step invariants: strictly positive `σ`, `|φ| ≤ 1 - δ_safe`, and
/// `|∫φⁿ⁺¹ - ∫φⁿ| ≤ mass_tol · |Ω|`.
pub fn check_step_invariants<T: Real>(
    phi_prev: &Field<T>,
    phi_next: &Field<T>,
    sigma_next: &Field<T>,
    params: &ModelParams<T>,
    mass_tol: T,
) -> Result<()> {
    if let Some(cell) = sigma_next.values().iter().position(|&s| !(s > T::zero())) {
        return Err(Error::PositivityLost { cell, value: sigma_next.values()[cell].to_f64_lossy() });
    }
    let bound = T::one() - params.delta_safe;
    if let Some(&v) = phi_next.values().iter().find(|v| !(v.abs() <= bound)) {
        return Err(Error::DomainViolation(format!("phase value {v} outside [-1 + delta_safe, 1 - delta_safe]")));
    }
    let drift = (integrate(phi_next) - integrate(phi_prev)).abs();
    let measure = phi_next.grid().measure();
    if drift > mass_tol * measure {
        return Err(Error::DomainViolation(format!("phase mass drift {drift:e} exceeds {:e}", mass_tol * measure)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::energy_report;
    use crate::model::ReactionSplit;
    use crate::potentials::AlphaSpec;
    use crate::solver::nutrient::step_sigma;

    #[test]
    fn entropy_residual_for_constant_growth() {
        let g = GridSpec::<f64>::new_1d(4, 1.0).unwrap();
        let c = 0.5;
        let tau = 0.1;
        let p = ModelParams::new(0.0, 0.0, AlphaSpec::Constant(c)).with_reaction(ReactionSplit::Implicit);
        let s0 = Field::constant(g, 1.0);
        let s1 = step_sigma(&s0, &Field::zeros(g), &p, tau).unwrap();
        let r = entropy_identity_residual(&s0, &s1, &Field::zeros(g), &p, tau).unwrap();
        let expect = ((1.0 / (1.0 - c * tau)) as f64).ln() / tau - c;
        assert!((r - expect).abs() < 1e-13, "{r} vs {expect}");
    }

    #[test]
    fn gibbs_state_has_no_entropy_production() {
        let g = GridSpec::<f64>::new_1d(16, 1.0).unwrap();
        let chi = 1.3;
        let p = ModelParams::new(chi, 0.0, AlphaSpec::Constant(0.0));
        let phi = Field::from_fn(g, |x, _| 0.5 * (4.0 * x).cos());
        let sigma = phi.map(|q| (-chi * (1.0 - q)).exp() * 3.0);
        let r = entropy_identity_residual(&sigma, &sigma, &phi, &p, 0.1).unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn stationary_state_has_zero_energy_residual() {
        let g = GridSpec::<f64>::new_1d(6, 1.0).unwrap();
        let p = ModelParams::new(1.0, 0.5, AlphaSpec::Constant(0.0));
        let phi = Field::constant(g, 0.1);
        let sigma = Field::constant(g, 2.0);
        let mu = crate::functionals::chemical_potential(&phi, &sigma, &p).unwrap();
        let rep = energy_report(0.0, &phi, &sigma, &mu, &p).unwrap();
        let r = energy_law_residual(rep.e_total, &rep, &phi, &sigma, &p, 0.1).unwrap();
        assert_eq!(r, 0.0);
        let battery = TestBattery::standard(&g);
        let rows = weak_residuals(&phi, &sigma, &phi, &sigma, &mu, 0.1, &p, &battery).unwrap();
        assert!(rows.iter().all(|r| r.phi < 1e-14 && r.sigma < 1e-14));
    }

    #[test]
    fn constant_rate_mass_row() {
        let g = GridSpec::<f64>::new_2d(5, 4, 1.0, 1.0).unwrap();
        for (c, split) in [(-1.0, ReactionSplit::SignSplit), (0.5, ReactionSplit::SignSplit), (0.5, ReactionSplit::Implicit)] {
            let p = ModelParams::new(0.7, 0.0, AlphaSpec::Constant(c)).with_reaction(split);
            let phi = Field::from_fn(g, |x, y| 0.3 * (3.0 * x).sin() * y);
            let s0 = Field::from_fn(g, |x, y| 1.0 + x * y);
            let s1 = step_sigma(&s0, &phi, &p, 0.05).unwrap();
            let rows = weak_residuals(&phi, &s0, &phi, &s1, &Field::zeros(g), 0.05, &p, &TestBattery::standard(&g)).unwrap();
            let one = &rows[0];
            assert_eq!(one.test, "one");
            let (m0, m1) = (integrate(&s0), integrate(&s1));
            let expect = match split {
                ReactionSplit::SignSplit if c > 0.0 => c * m0,
                _ => c * m1,
            };
            assert!(((m1 - m0) / 0.05 - expect).abs() < 1e-10);
            assert!(one.sigma < 1e-10, "{}", one.sigma);
        }
    }
}

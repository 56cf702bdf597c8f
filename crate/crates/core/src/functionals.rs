//! Quadratures of the free energy, chemical potentials, dissipation and the
//! relative energy / relative dissipation pair.
//!
//! Cell integrals use the midpoint rule; gradient terms live on interior faces
//! with the dual volume `hx·hy` (see [`face_inner`]). Wherever `σ` multiplies
//! a face gradient it enters through its logarithmic mean, which makes
//! `σ̄ ∇ln σ = ∇σ` hold exactly at every face.

use crate::error::{Error, Result};
use crate::grid::{face_inner, grad, integrate, inv_neumann_laplacian, laplacian, Field, GridSpec};
use crate::model::ModelParams;
use crate::potentials::{beta, gamma_hat, potential, potential_prime, relative_entropy_density};
use crate::scalar::{ordered_sum, Real};

/// `(a - b) / (ln a - ln b)` for `a, b > 0`, equal to `a` when `a = b`.
pub fn log_mean<T: Real>(a: T, b: T) -> T {
    let x = a.ln() - b.ln();
    // b · (e^x - 1)/x
    let rel = if x.abs() < T::lit(1e-4) {
        T::one() + x * (T::half() + x / T::lit(6.0))
    } else {
        x.exp_m1() / x
    };
    b * rel
}

pub(crate) fn check_positive<T: Real>(sigma: &Field<T>) -> Result<()> {
    match sigma.values().iter().position(|&s| !(s > T::zero())) {
        Some(cell) => Err(Error::NonpositiveSigma { cell, value: sigma.values()[cell].to_f64_lossy() }),
        None => Ok(()),
    }
}

fn check_phase<T: Real>(phi: &Field<T>, context: &'static str) -> Result<()> {
    match phi.values().iter().find(|v| !(v.abs() < T::one())) {
        Some(&v) => Err(Error::OutOfDomain { context, value: v.to_f64_lossy() }),
        None => Ok(()),
    }
}

fn cell_integral<T: Real>(grid: &GridSpec<T>, it: impl Iterator<Item = T>) -> T {
    ordered_sum(it) * grid.cell_volume()
}

/// The pieces of `E_ε(φ, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts<T> {
    /// `½ ∫ |∇φ|²`
    pub dirichlet: T,
    /// `∫ F(φ)`
    pub potential: T,
    /// `χ ∫ σ (1 - φ)`
    pub coupling: T,
    /// `∫ σ (ln σ - 1)`
    pub sigma_entropy: T,
    /// `(ε/2) ∫ (σ - 1)²`
    pub eps_term: T,
}

impl<T: Real> EnergyParts<T> {
    pub fn total(&self) -> T {
        self.dirichlet + self.potential + self.coupling + self.sigma_entropy + self.eps_term
    }
}

pub fn energy<T: Real>(phi: &Field<T>, sigma: &Field<T>, params: &ModelParams<T>) -> Result<EnergyParts<T>> {
    phi.check_same_grid(sigma)?;
    check_phase(phi, "energy")?;
    check_positive(sigma)?;
    let grid = phi.grid();
    let g = grad(phi);
    let p = phi.values();
    let s = sigma.values();
    let potential = cell_integral(grid, p.iter().map(|&r| potential(r, params.lambda).expect("checked")));
    let coupling = params.chi * cell_integral(grid, p.iter().zip(s).map(|(&r, &x)| x * (T::one() - r)));
    let sigma_entropy = cell_integral(grid, s.iter().map(|&x| x * (x.ln() - T::one())));
    let eps_term = if params.epsilon == T::zero() {
        T::zero()
    } else {
        T::half() * params.epsilon * cell_integral(grid, s.iter().map(|&x| (x - T::one()) * (x - T::one())))
    };
    Ok(EnergyParts { dirichlet: T::half() * face_inner(&g, &g), potential, coupling, sigma_entropy, eps_term })
}

/// `μ = -Δ_h φ + β(φ) - λ φ - χ σ`.
pub fn chemical_potential<T: Real>(phi: &Field<T>, sigma: &Field<T>, params: &ModelParams<T>) -> Result<Field<T>> {
    phi.check_same_grid(sigma)?;
    let lap = laplacian(phi);
    let s = sigma.values();
    let l = lap.values();
    phi.try_map(|i, r| Ok(-l[i] + potential_prime(r, params.lambda)? - params.chi * s[i]))
}

/// `μ_σ = ln σ + ε (σ - 1) + χ (1 - φ)`, the variational derivative of `E_ε` in `σ`.
pub fn nutrient_potential<T: Real>(phi: &Field<T>, sigma: &Field<T>, chi: T, epsilon: T) -> Result<Field<T>> {
    phi.check_same_grid(sigma)?;
    check_positive(sigma)?;
    let p = phi.values();
    Ok(sigma.try_map(|i, s| Ok(s.ln() + epsilon * (s - T::one()) + chi * (T::one() - p[i])))?)
}

/// Face values of the mobility `σ / (1 + ε σ)` built from the logarithmic mean.
pub fn face_mobility<T: Real>(sigma: &Field<T>, epsilon: T) -> Vec<T> {
    let grid = sigma.grid();
    let s = sigma.values();
    grid.faces()
        .map(|f| {
            let m = log_mean(s[f.right], s[f.left]);
            m / (T::one() + epsilon * m)
        })
        .collect()
}

/// `D = ∫ σ/(1+εσ) |∇μ_σ|² + |∇μ|²`.
pub fn dissipation<T: Real>(
    phi: &Field<T>,
    mu: &Field<T>,
    sigma: &Field<T>,
    chi: T,
    epsilon: T,
) -> Result<T> {
    let mu_sigma = nutrient_potential(phi, sigma, chi, epsilon)?;
    let mob = face_mobility(sigma, epsilon);
    let gq = grad(&mu_sigma);
    let gm = grad(mu);
    let vol = phi.grid().cell_volume();
    let sigma_part = ordered_sum(mob.iter().zip(gq.values()).map(|(&m, &q)| m * q * q)) * vol;
    Ok(sigma_part + face_inner(&gm, &gm))
}

/// Energy, dissipation and tracked integrals at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport<T> {
    pub t: T,
    pub e_total: T,
    pub parts: EnergyParts<T>,
    pub dissipation: T,
    pub mass_phi: T,
    pub mass_sigma: T,
    pub min_phi: T,
    pub max_phi: T,
    pub min_sigma: T,
    pub max_sigma: T,
    /// `∫ |ln σ|`
    pub ln_sigma_l1: T,
    /// `∫ |β(φ)| ln(1 + |β(φ)|)`
    pub llogl_beta: T,
    /// `∫ γ̂(ln σ)`
    pub gamma_hat_ln_sigma: T,
    /// `∫ |∇ ln σ|²`
    pub grad_ln_sigma_sq: T,
    /// `∫ σ (ln σ - 1) + 1 ≥ 0`
    pub entropy_excess: T,
}

pub fn energy_report<T: Real>(
    t: T,
    phi: &Field<T>,
    sigma: &Field<T>,
    mu: &Field<T>,
    params: &ModelParams<T>,
) -> Result<EnergyReport<T>> {
    let parts = energy(phi, sigma, params)?;
    let grid = phi.grid();
    let ln_sigma = sigma.map(|s| s.ln());
    let gl = grad(&ln_sigma);
    let llogl_beta = cell_integral(
        grid,
        phi.values().iter().map(|&r| {
            let b = beta(r).expect("checked").abs();
            b * b.ln_1p()
        }),
    );
    Ok(EnergyReport {
        t,
        e_total: parts.total(),
        parts,
        dissipation: dissipation(phi, mu, sigma, params.chi, params.epsilon)?,
        mass_phi: integrate(phi),
        mass_sigma: integrate(sigma),
        min_phi: phi.min(),
        max_phi: phi.max(),
        min_sigma: sigma.min(),
        max_sigma: sigma.max(),
        ln_sigma_l1: cell_integral(grid, ln_sigma.values().iter().map(|v| v.abs())),
        llogl_beta,
        gamma_hat_ln_sigma: cell_integral(grid, ln_sigma.values().iter().map(|&v| gamma_hat(v))),
        grad_ln_sigma_sq: face_inner(&gl, &gl),
        entropy_excess: cell_integral(grid, sigma.values().iter().map(|&s| s * (s.ln() - T::one()) + T::one())),
    })
}

/// Relative energy of `(φ, σ)` with respect to the reference `(φ̃, σ̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelEnergyReport<T> {
    pub t: T,
    pub r: T,
    /// `∫ σ - σ̃ - σ̃ ln(σ/σ̃)`
    pub kl_part: T,
    /// `(M/2) ‖φ - φ̃‖²_{V₀'}`
    pub v0dual_part: T,
    pub w: T,
    pub m: T,
}

/// `M = max{1, χ² max σ̃}`, the weight that makes the relative dissipation coercive.
pub fn default_weight<T: Real>(chi: T, sigma_ref: &Field<T>) -> T {
    T::one().max(chi * chi * sigma_ref.max())
}

/// `R = ∫ σ - σ̃ - σ̃ ln(σ/σ̃) + (M/2) ‖φ - φ̃ - mean‖²_{V₀'}`. The returned report has
/// `t = 0` and `w = 0`; see [`relative_dissipation`].
pub fn relative_energy<T: Real>(
    phi: &Field<T>,
    sigma: &Field<T>,
    phi_ref: &Field<T>,
    sigma_ref: &Field<T>,
    m: T,
) -> Result<RelEnergyReport<T>> {
    phi.check_same_grid(phi_ref)?;
    sigma.check_same_grid(sigma_ref)?;
    check_positive(sigma)?;
    check_positive(sigma_ref)?;
    let grid = sigma.grid();
    let kl_part = cell_integral(
        grid,
        sigma.values().iter().zip(sigma_ref.values()).map(|(&s, &r)| relative_entropy_density(s, r)),
    );
    // Masses may differ at discretization scale; the V₀' part sees only the
    // zero-mean component.
    let diff = phi.sub(phi_ref).centered();
    let u = inv_neumann_laplacian(&diff)?;
    let v0 = crate::grid::inner(&diff, &u).max(T::zero());
    let v0dual_part = T::half() * m * v0;
    Ok(RelEnergyReport { t: T::zero(), r: kl_part + v0dual_part, kl_part, v0dual_part, w: T::zero(), m })
}

/// Pieces of the relative dissipation, kept apart so the Young absorption
/// can be checked term by term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelDissipation<T> {
    /// `∫ σ̃ |∇ln σ - ∇ln σ̃|²`
    pub entropic: T,
    /// `-χ ∫ σ̃ (∇ln σ - ∇ln σ̃)·(∇φ - ∇φ̃)`
    pub cross: T,
    /// `M ∫ |∇φ - ∇φ̃|²`
    pub gradient: T,
    /// `M ∫ (F'(φ) - F'(φ̃))(φ - φ̃) + λ |φ - φ̃|² = M ∫ (β(φ) - β(φ̃))(φ - φ̃) ≥ 0`
    pub monotone: T,
}

impl<T: Real> RelDissipation<T> {
    pub fn total(&self) -> T {
        self.entropic + self.cross + self.gradient + self.monotone
    }
}

pub fn relative_dissipation_parts<T: Real>(
    phi: &Field<T>,
    sigma: &Field<T>,
    phi_ref: &Field<T>,
    sigma_ref: &Field<T>,
    chi: T,
    lambda: T,
    m: T,
) -> Result<RelDissipation<T>> {
    phi.check_same_grid(phi_ref)?;
    sigma.check_same_grid(sigma_ref)?;
    check_positive(sigma)?;
    check_positive(sigma_ref)?;
    let grid = *sigma.grid();
    let vol = grid.cell_volume();
    let dl = grad(&sigma.map(|s| s.ln()).sub(&sigma_ref.map(|s| s.ln())));
    let dp = grad(&phi.sub(phi_ref));
    let sr = sigma_ref.values();
    let weight: Vec<T> = grid.faces().map(|f| log_mean(sr[f.right], sr[f.left])).collect();
    let entropic = ordered_sum(weight.iter().zip(dl.values()).map(|(&w, &a)| w * a * a)) * vol;
    let cross = -chi
        * ordered_sum(weight.iter().zip(dl.values()).zip(dp.values()).map(|((&w, &a), &b)| w * a * b))
        * vol;
    let gradient = m * face_inner(&dp, &dp);
    let mut mono = Vec::with_capacity(phi.len());
    for (&p, &q) in phi.values().iter().zip(phi_ref.values()) {
        let d = p - q;
        mono.push((potential_prime(p, lambda)? - potential_prime(q, lambda)?) * d + lambda * d * d);
    }
    let monotone = m * cell_integral(&grid, mono.into_iter());
    Ok(RelDissipation { entropic, cross, gradient, monotone })
}

pub fn relative_dissipation<T: Real>(
    phi: &Field<T>,
    sigma: &Field<T>,
    phi_ref: &Field<T>,
    sigma_ref: &Field<T>,
    chi: T,
    lambda: T,
    m: T,
) -> Result<T> {
    Ok(relative_dissipation_parts(phi, sigma, phi_ref, sigma_ref, chi, lambda, m)?.total())
}

/// Right-hand side of the relative energy inequality:
///
/// ```text
/// ∫ [α(φ,σ) - α(φ̃,σ̃)](σ - σ̃) + α(φ̃,σ̃)(σ - σ̃ - σ̃ ln(σ/σ̃)) + Mχ (σ - σ̃)(φ - φ̃) + λM |φ - φ̃|².
/// ```
pub fn relative_energy_source<T: Real>(
    phi: &Field<T>,
    sigma: &Field<T>,
    phi_ref: &Field<T>,
    sigma_ref: &Field<T>,
    params: &ModelParams<T>,
    m: T,
) -> Result<T> {
    phi.check_same_grid(phi_ref)?;
    sigma.check_same_grid(sigma_ref)?;
    check_positive(sigma)?;
    check_positive(sigma_ref)?;
    let mut terms = Vec::with_capacity(phi.len());
    for i in 0..phi.len() {
        let (p, q) = (phi.values()[i], phi_ref.values()[i]);
        let (s, r) = (sigma.values()[i], sigma_ref.values()[i]);
        let a = params.alpha.eval(p, s)?;
        let a_ref = params.alpha.eval(q, r)?;
        let ds = s - r;
        let dp = p - q;
        terms.push(
            (a - a_ref) * ds
                + a_ref * relative_entropy_density(s, r)
                + m * params.chi * ds * dp
                + params.lambda * m * dp * dp,
        );
    }
    Ok(cell_integral(phi.grid(), terms.into_iter()))
}

/// Worst relative mismatch between a central finite difference of the
/// discrete energy and the corresponding discrete potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalCheck<T> {
    pub phi_rel_error: T,
    pub sigma_rel_error: T,
}

/// Perturbs every cell of `φ` and `σ` by `±step` and compares
/// `(E(+) - E(-)) / (2 step)` with `potential · cell_volume`. Errors are
/// relative to `max_cells |potential| · cell_volume`.
pub fn variational_check<T: Real>(
    phi: &Field<T>,
    sigma: &Field<T>,
    params: &ModelParams<T>,
    step: T,
) -> Result<VariationalCheck<T>> {
    let vol = phi.grid().cell_volume();
    let mu = chemical_potential(phi, sigma, params)?;
    let mu_sigma = nutrient_potential(phi, sigma, params.chi, params.epsilon)?;
    let fd = |which: usize, cell: usize| -> Result<T> {
        let eval = |d: T| -> Result<T> {
            let (mut p, mut s) = (phi.clone(), sigma.clone());
            let target = if which == 0 { &mut p } else { &mut s };
            target.values_mut()[cell] = target.values()[cell] + d;
            Ok(energy(&p, &s, params)?.total())
        };
        Ok((eval(step)? - eval(-step)?) / (T::two() * step))
    };
    let mut errs = [T::zero(); 2];
    for (which, pot) in [&mu, &mu_sigma].into_iter().enumerate() {
        let scale = pot.max_abs() * vol;
        let scale = if scale > T::zero() { scale } else { T::one() };
        for cell in 0..phi.len() {
            let e = (fd(which, cell)? - pot.values()[cell] * vol).abs() / scale;
            errs[which] = errs[which].max(e);
        }
    }
    Ok(VariationalCheck { phi_rel_error: errs[0], sigma_rel_error: errs[1] })
}

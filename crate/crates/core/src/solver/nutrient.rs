//! Implicit Scharfetter–Gummel step for the nutrient.
//!
//! The face flux of `∇σ + m σ ∇w`, `w = χ(1 - φ)`, `m = 1/(1 + εσ)`, is
//!
//! ```text
//! J = (B(-Δ) σ_R - B(Δ) σ_L) / h,     Δ = m_face (w_R - w_L),     B(x) = x / (eˣ - 1),
//! ```
//!
//! which vanishes exactly when `σ_R / σ_L = e^{-Δ}`. The implicit system has
//! nonpositive off-diagonals and zero column sums in its transport part, so it
//! is an M-matrix: positive data give a positive solution and `∫σ` changes
//! only through the reaction term.

use crate::error::{Error, Result};
use crate::grid::{FaceField, Field};
use crate::linalg::BandedMatrix;
use crate::model::{ModelParams, ReactionSplit};
use crate::scalar::Real;

/// Bernoulli function `x / (eˣ - 1)`, `B(0) = 1`.
pub fn bernoulli<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-5) {
        T::one() - x * (T::half() - x / T::lit(12.0))
    } else {
        x / x.exp_m1()
    }
}

/// Face drift increments `Δ = m_face (w_R - w_L)` with the mobility factor
/// taken from `sigma_mob` (arithmetic face mean).
fn drift_increments<T: Real>(phi: &Field<T>, sigma_mob: &Field<T>, chi: T, epsilon: T) -> Vec<T> {
    let grid = phi.grid();
    let p = phi.values();
    let s = sigma_mob.values();
    grid.faces()
        .map(|f| {
            let m = T::one() / (T::one() + epsilon * T::half() * (s[f.left] + s[f.right]));
            // w_R - w_L = -χ (φ_R - φ_L)
            -m * chi * (p[f.right] - p[f.left])
        })
        .collect()
}

/// Scharfetter–Gummel face flux of `sigma` for the drift potential `χ(1 - φ)`.
pub fn sg_flux<T: Real>(sigma: &Field<T>, phi: &Field<T>, sigma_mob: &Field<T>, chi: T, epsilon: T) -> FaceField<T> {
    let grid = *sigma.grid();
    let s = sigma.values();
    let deltas = drift_increments(phi, sigma_mob, chi, epsilon);
    let values = grid
        .faces()
        .zip(deltas)
        .map(|(f, d)| (bernoulli(-d) * s[f.right] - bernoulli(d) * s[f.left]) / grid.face_spacing(&f))
        .collect();
    FaceField::from_values(grid, values).expect("one value per face")
}

/// Reaction rates `α(φ_new, σⁿ)` split into `(implicit, explicit)` coefficients.
pub(crate) fn reaction_coefficients<T: Real>(
    sigma_n: &Field<T>,
    phi_new: &Field<T>,
    params: &ModelParams<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let mut imp = Vec::with_capacity(sigma_n.len());
    let mut exp = Vec::with_capacity(sigma_n.len());
    for (&p, &s) in phi_new.values().iter().zip(sigma_n.values()) {
        let a = params.alpha.eval(p, s)?;
        match params.reaction {
            ReactionSplit::SignSplit => {
                imp.push(a.min(T::zero()));
                exp.push(a.max(T::zero()));
            }
            ReactionSplit::Implicit => {
                imp.push(a);
                exp.push(T::zero());
            }
        }
    }
    Ok((imp, exp))
}

/// One implicit nutrient step with the phase frozen at its new value.
pub fn step_sigma<T: Real>(sigma_n: &Field<T>, phi_new: &Field<T>, params: &ModelParams<T>, dt: T) -> Result<Field<T>> {
    sigma_n.check_same_grid(phi_new)?;
    if let Some(cell) = sigma_n.values().iter().position(|&s| !(s > T::zero())) {
        return Err(Error::NonpositiveSigma { cell, value: sigma_n.values()[cell].to_f64_lossy() });
    }
    let grid = *sigma_n.grid();
    let n = grid.num_cells();
    let (imp, exp) = reaction_coefficients(sigma_n, phi_new, params)?;
    let rate = phi_new
        .values()
        .iter()
        .zip(sigma_n.values())
        .map(|(&p, &s)| params.alpha.eval(p, s).map(|a| a.max(T::zero())))
        .try_fold(T::zero(), |m, a| a.map(|a| m.max(a)))?;
    if dt * rate >= T::one() {
        return Err(Error::StepTooLarge { dt: dt.to_f64_lossy(), rate: rate.to_f64_lossy() });
    }

    let band = grid.stencil_bandwidth();
    let mut a = BandedMatrix::zeros(n, band, band);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        a.add(i, i, T::one() - dt * imp[i]);
        rhs.push(sigma_n.values()[i] * (T::one() + dt * exp[i]));
    }
    let deltas = drift_increments(phi_new, sigma_n, params.chi, params.epsilon);
    for (f, d) in grid.faces().zip(deltas) {
        let h = grid.face_spacing(&f);
        let c = dt / (h * h);
        let (bp, bm) = (bernoulli(d), bernoulli(-d));
        a.add(f.left, f.left, c * bp);
        a.add(f.left, f.right, -c * bm);
        a.add(f.right, f.right, c * bm);
        a.add(f.right, f.left, -c * bp);
    }
    a.solve(&mut rhs)?;
    if let Some(cell) = rhs.iter().position(|&s| !(s > T::zero())) {
        return Err(Error::PositivityLost { cell, value: rhs[cell].to_f64_lossy() });
    }
    Ok(Field::from_vec_unchecked(grid, rhs))
}

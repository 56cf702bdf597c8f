//! Initial-data generators and their admissibility report.
//!
//! The seeded random generators are sums of Neumann cosine modes
//! `cos(kπx/Lx) cos(lπy/Ly)`, so every odd normal derivative vanishes at the
//! boundary and the discrete operators see no artificial boundary layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{integrate, Field, GridSpec};
use crate::potentials::gamma_hat;
use crate::scalar::{ordered_sum, Real};

/// One Neumann mode `amplitude · cos(kx π x / Lx) · cos(ky π y / Ly)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineTerm<T> {
    pub amplitude: T,
    pub kx: usize,
    pub ky: usize,
}

impl<T: Real> CosineTerm<T> {
    pub fn new(amplitude: T, kx: usize, ky: usize) -> Self {
        Self { amplitude, kx, ky }
    }

    fn eval(&self, grid: &GridSpec<T>, x: T, y: T) -> T {
        let l = grid.lengths();
        let pi = T::PI();
        let mut v = self.amplitude * (T::from_usize_lossy(self.kx) * pi * x / l[0]).cos();
        if grid.dim() == 2 {
            v = v * (T::from_usize_lossy(self.ky) * pi * y / l[1]).cos();
        }
        v
    }
}

fn series<T: Real>(grid: &GridSpec<T>, mean: T, terms: &[CosineTerm<T>]) -> Field<T> {
    Field::from_fn(*grid, |x, y| mean + ordered_sum(terms.iter().map(|t| t.eval(grid, x, y))))
}

/// Highest wavenumber used by the random generators.
const RANDOM_MODES: usize = 6;

/// Smooth seeded shape with values in `[-1, 1]`: random mode amplitudes
/// normalized so `Σ|a| = 1`.
fn random_shape<T: Real>(grid: &GridSpec<T>, seed: u64) -> Field<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ky_max = if grid.dim() == 2 { RANDOM_MODES } else { 0 };
    let mut terms = Vec::new();
    for kx in 0..=RANDOM_MODES {
        for ky in 0..=ky_max {
            if kx + ky == 0 {
                continue;
            }
            // Decay with the wavenumber keeps the shape smooth.
            let decay = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
            let a: f64 = rng.gen_range(-1.0..1.0) * decay;
            terms.push(CosineTerm::new(T::lit(a), kx, ky));
        }
    }
    let norm = ordered_sum(terms.iter().map(|t| t.amplitude.abs()));
    for t in &mut terms {
        t.amplitude = t.amplitude / norm;
    }
    series(grid, T::zero(), &terms)
}

/// Initial phase field.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiInit<T> {
    Constant(T),
    /// `mean + amplitude · S`, `S` a smooth seeded shape with `|S| ≤ 1`.
    RandomPerturbation { mean: T, amplitude: T, seed: u64 },
    /// `amplitude · tanh((x - center) / width)`, a planar interface normal to `x`.
    TanhInterface { center: T, width: T, amplitude: T },
    CosineSeries { mean: T, terms: Vec<CosineTerm<T>> },
}

impl<T: Real> PhiInit<T> {
    pub fn sample(&self, grid: &GridSpec<T>) -> Result<Field<T>> {
        let f = match self {
            PhiInit::Constant(c) => Field::constant(*grid, *c),
            PhiInit::RandomPerturbation { mean, amplitude, seed } => {
                random_shape(grid, *seed).map(|s| *mean + *amplitude * s)
            }
            PhiInit::TanhInterface { center, width, amplitude } => {
                if !(*width > T::zero()) {
                    return Err(Error::InvalidParameter(format!("interface width must be positive, got {width}")));
                }
                Field::from_fn(*grid, |x, _| *amplitude * ((x - *center) / *width).tanh())
            }
            PhiInit::CosineSeries { mean, terms } => series(grid, *mean, terms),
        };
        if let Some(&v) = f.values().iter().find(|v| !(v.abs() < T::one())) {
            return Err(Error::DomainViolation(format!("initial phase value {v} violates |phi0| < 1")));
        }
        Ok(f)
    }
}

/// Initial nutrient concentration.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaInit<T> {
    Constant(T),
    /// `background + A exp(-|x - center|² / (2 width²))` with `A` chosen so the
    /// bump carries exactly `mass` on the grid.
    GaussianBump { center: [T; 2], width: T, mass: T, background: T },
    /// `floor + exp(S)`, `S` a smooth seeded shape with `|S| ≤ 1`.
    RandomPositive { seed: u64, floor: T },
    CosineSeries { mean: T, terms: Vec<CosineTerm<T>> },
}

impl<T: Real> SigmaInit<T> {
    pub fn sample(&self, grid: &GridSpec<T>) -> Result<Field<T>> {
        let f = match self {
            SigmaInit::Constant(c) => Field::constant(*grid, *c),
            SigmaInit::GaussianBump { center, width, mass, background } => {
                if !(*width > T::zero()) || !(*mass >= T::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian bump needs width > 0 and mass >= 0, got width={width}, mass={mass}"
                    )));
                }
                let two_d = grid.dim() == 2;
                let shape = Field::from_fn(*grid, |x, y| {
                    let dx = x - center[0];
                    let dy = if two_d { y - center[1] } else { T::zero() };
                    (-(dx * dx + dy * dy) / (T::two() * *width * *width)).exp()
                });
                let scale = *mass / integrate(&shape);
                shape.map(|s| *background + scale * s)
            }
            SigmaInit::RandomPositive { seed, floor } => random_shape(grid, *seed).map(|s| *floor + s.exp()),
            SigmaInit::CosineSeries { mean, terms } => series(grid, *mean, terms),
        };
        if let Some(&v) = f.values().iter().find(|v| !(**v > T::zero() && v.is_finite())) {
            return Err(Error::DomainViolation(format!("initial concentration {v} violates sigma0 > 0")));
        }
        Ok(f)
    }
}

/// Discrete admissibility quantities of an initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcReport<T> {
    pub mean_phi: T,
    pub min_sigma: T,
    /// `∫ σ₀ ln(1 + σ₀)`
    pub sigma_log_moment: T,
    /// `∫ γ̂(ln σ₀)`
    pub gamma_hat_ln_sigma: T,
}

impl<T: Real> IcReport<T> {
    pub fn admissible(&self) -> bool {
        self.mean_phi.abs() < T::one()
            && self.min_sigma > T::zero()
            && self.sigma_log_moment.is_finite()
            && self.gamma_hat_ln_sigma.is_finite()
    }
}

pub fn ic_report<T: Real>(phi: &Field<T>, sigma: &Field<T>) -> Result<IcReport<T>> {
    phi.check_same_grid(sigma)?;
    let vol = sigma.grid().cell_volume();
    Ok(IcReport {
        mean_phi: phi.mean(),
        min_sigma: sigma.min(),
        sigma_log_moment: ordered_sum(sigma.values().iter().map(|&s| s * s.ln_1p())) * vol,
        gamma_hat_ln_sigma: ordered_sum(sigma.values().iter().map(|&s| gamma_hat(s.ln()))) * vol,
    })
}

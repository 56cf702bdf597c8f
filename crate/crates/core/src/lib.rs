//! Structure-preserving finite-volume simulator for the Cahn–Hilliard /
//! Keller–Segel chemotaxis system
//!
//! ```text
//! ∂t φ = Δμ,               μ = -Δφ + F'(φ) - χσ,
//! ∂t σ = div(∇σ + χ σ/(1+εσ) ∇(1-φ)) + α(φ, σ) σ,
//! ```
//!
//! with no-flux boundary conditions on a 1D interval or 2D box.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, the precision all stated tolerances
//! refer to.

pub mod benchmark;
pub mod checks;
pub mod diagnostics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod initial;
pub mod linalg;
pub mod model;
pub mod potentials;
pub mod scalar;
pub mod solver;
pub mod wsu;

pub use error::{Error, Result};
pub use scalar::Real;

pub type GridSpec = grid::GridSpec<f64>;
pub type Field = grid::Field<f64>;
pub type FaceField = grid::FaceField<f64>;
pub type AlphaSpec = potentials::AlphaSpec<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type State = solver::State<f64>;
pub type RunResult = solver::RunResult<f64>;
pub type EnergyReport = functionals::EnergyReport<f64>;
pub type RelEnergyReport = functionals::RelEnergyReport<f64>;

pub type GridSpec32 = grid::GridSpec<f32>;
pub type Field32 = grid::Field<f32>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type SolverConfig32 = solver::SolverConfig<f32>;
pub type State32 = solver::State<f32>;

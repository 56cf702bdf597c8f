//! The standard smooth benchmark.
//!
//! `Ω = (0, 2π)` with 64 cells, `χ = 1`, `λ = 0.5`, logistic `α` (`ℓ = 1`,
//! `p = 1`), and Neumann-compatible data
//!
//! ```text
//! φ₀ = 0.2 cos x + 0.1 cos 2x,     σ₀ = 1 + 0.3 cos 2x,
//! ```
//!
//! run to `t = 1` with `τ = 10⁻²`. The logistic rate keeps the reaction
//! source active, so the energy-law residual has a nonzero positive part to
//! measure under refinement.

use crate::error::Result;
use crate::grid::GridSpec;
use crate::initial::{CosineTerm, PhiInit, SigmaInit};
use crate::model::ModelParams;
use crate::potentials::AlphaSpec;
use crate::scalar::Real;
use crate::solver::{run, RunResult, SolverConfig, State};
use crate::wsu::PairedRunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark<T> {
    pub grid: GridSpec<T>,
    pub params: ModelParams<T>,
    pub phi0: PhiInit<T>,
    pub sigma0: SigmaInit<T>,
    pub dt: T,
    pub t_end: T,
    pub report_every: T,
}

impl<T: Real> Benchmark<T> {
    pub fn smooth() -> Self {
        let two_pi = T::two() * T::PI();
        Self {
            grid: GridSpec::new_1d(64, two_pi).expect("valid grid"),
            params: ModelParams::new(T::one(), T::half(), AlphaSpec::logistic(T::one(), T::one()).expect("valid")),
            // cos(kπx/L) with L = 2π: k = 2 is cos x, k = 4 is cos 2x.
            phi0: PhiInit::CosineSeries {
                mean: T::zero(),
                terms: vec![CosineTerm::new(T::lit(0.2), 2, 0), CosineTerm::new(T::lit(0.1), 4, 0)],
            },
            sigma0: SigmaInit::CosineSeries { mean: T::one(), terms: vec![CosineTerm::new(T::lit(0.3), 4, 0)] },
            dt: T::lit(1e-2),
            t_end: T::one(),
            report_every: T::lit(0.1),
        }
    }

    pub fn initial_state(&self) -> Result<State<T>> {
        State::initial(self.phi0.sample(&self.grid)?, self.sigma0.sample(&self.grid)?, &self.params)
    }

    /// Fixed-step run with step `dt` to `t_end`.
    pub fn run(&self, dt: T) -> Result<RunResult<T>> {
        run(self.initial_state()?, &self.params, &SolverConfig::fixed(dt), self.t_end, self.report_every)
    }

    /// Paired-run configuration on this benchmark: coarse step `10⁻³`, fine
    /// grid and step refined 4×.
    pub fn wsu_config(&self) -> PairedRunConfig<T> {
        PairedRunConfig::new(
            self.params.clone(),
            self.phi0.clone(),
            self.sigma0.clone(),
            self.grid,
            T::lit(1e-3),
            self.t_end,
        )
    }

    /// [`Benchmark::wsu_config`] with `h` and `τ` of both runs halved.
    pub fn wsu_config_refined(&self) -> PairedRunConfig<T> {
        let cells = self.grid.axis_cells();
        let grid = GridSpec::from_axes(&[2 * cells[0]], &self.grid.lengths()).expect("valid grid");
        let mut cfg = self.wsu_config();
        cfg.coarse_grid = grid;
        cfg.coarse_dt = cfg.coarse_dt * T::half();
        cfg
    }
}

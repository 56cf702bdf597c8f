//! Lie-split time stepping: an implicit convex-splitting step for `φ` with
//! `σⁿ` frozen, then an implicit Scharfetter–Gummel step for `σ` with `φⁿ⁺¹`
//! frozen. Reports are emitted on a fixed time cadence; steps are clipped to
//! land on report times exactly.

pub mod cahn_hilliard;
pub mod nutrient;
pub mod riccati;

pub use cahn_hilliard::{step_cahn_hilliard, ChStep, NewtonOptions};
pub use nutrient::{bernoulli, sg_flux, step_sigma};
pub use riccati::{estimate_t0, estimate_t0_with_horizon};

use crate::diagnostics::{
    check_step_invariants, energy_law_residual, entropy_identity_residual, weak_residuals, TestBattery, Trackers,
};
use crate::error::{Error, Result};
use crate::functionals::{chemical_potential, energy_report, EnergyReport};
use crate::grid::{integrate, Field};
use crate::model::ModelParams;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub phi: Field<T>,
    pub sigma: Field<T>,
    /// `-Δ_h φ + F'(φ) - χ σ` at the current level.
    pub mu: Field<T>,
    pub t: T,
}

impl<T: Real> State<T> {
    /// Builds a state from initial data after checking admissibility:
    /// `|φ| ≤ 1 - δ_safe`, `σ > 0`, and matching grids.
    pub fn initial(phi: Field<T>, sigma: Field<T>, params: &ModelParams<T>) -> Result<Self> {
        if phi.grid() != sigma.grid() {
            return Err(Error::IncompatibleGrids("phase and nutrient fields live on different grids".into()));
        }
        let bound = T::one() - params.delta_safe;
        if let Some(&v) = phi.values().iter().find(|v| !(v.abs() <= bound)) {
            return Err(Error::DomainViolation(format!(
                "initial phase must satisfy |phi0| < 1 (within delta_safe = {}), found {v}",
                params.delta_safe
            )));
        }
        if let Some(&v) = sigma.values().iter().find(|&&v| !(v > T::zero())) {
            return Err(Error::DomainViolation(format!("initial nutrient must satisfy sigma0 > 0, found {v}")));
        }
        let mu = chemical_potential(&phi, &sigma, params)?;
        Ok(Self { phi, sigma, mu, t: T::zero() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub dt: T,
    pub dt_min: T,
    pub dt_max: T,
    pub newton: NewtonOptions<T>,
    /// Consecutive easy steps before the step grows.
    pub grow_after: usize,
    pub grow_factor: T,
    /// A step is easy if Newton needed at most this many iterations.
    pub easy_iters: usize,
    /// Allowed per-step drift of `∫φ`, relative to `|Ω|`.
    pub mass_tol: T,
}

impl<T: Real> SolverConfig<T> {
    /// Fixed step `dt` (no growth), halving allowed down to `dt / 1024`.
    pub fn fixed(dt: T) -> Self {
        Self {
            dt,
            dt_min: dt / T::lit(1024.0),
            dt_max: dt,
            newton: NewtonOptions::default(),
            grow_after: 3,
            grow_factor: T::lit(1.2),
            easy_iters: 4,
            mass_tol: T::lit(1e-10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > T::zero() && self.dt_min <= self.dt && self.dt <= self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt_min <= dt <= dt_max, got dt_min={}, dt={}, dt_max={}",
                self.dt_min, self.dt, self.dt_max
            )));
        }
        if !(self.grow_factor >= T::one()) {
            return Err(Error::InvalidParameter("grow_factor must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one composed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub state: State<T>,
    /// The potential the phase step solved with (explicit `λ`, lagged `σ`).
    pub mu_step: Field<T>,
    pub newton_iters: usize,
}

/// One Lie-split step of length `dt`.
pub fn step<T: Real>(state: &State<T>, params: &ModelParams<T>, newton: &NewtonOptions<T>, dt: T) -> Result<StepOutcome<T>> {
    let ch = step_cahn_hilliard(&state.phi, &state.sigma, params, dt, newton)?;
    let sigma = step_sigma(&state.sigma, &ch.phi, params, dt)?;
    let mu = chemical_potential(&ch.phi, &sigma, params)?;
    Ok(StepOutcome {
        state: State { phi: ch.phi, sigma, mu, t: state.t + dt },
        mu_step: ch.mu,
        newton_iters: ch.iters,
    })
}

/// Per accepted step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T> {
    pub t: T,
    pub dt: T,
    pub newton_iters: usize,
    /// Rejected attempts before this step was accepted.
    pub rejections: usize,
    pub energy_law_residual: T,
    pub entropy_identity_residual: T,
    /// `∫φⁿ⁺¹ - ∫φ⁰`
    pub mass_phi_drift: T,
    pub mass_sigma: T,
    pub min_sigma: T,
    /// `1 - max|φ|`
    pub phi_margin: T,
    /// Largest weak residual of the phase equation over the test battery.
    pub weak_phi: T,
    /// Largest weak residual of the nutrient equation over the test battery.
    pub weak_sigma: T,
}

/// One row of the report time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow<T> {
    pub energy: EnergyReport<T>,
    pub energy_law_residual: T,
    pub entropy_identity_residual: T,
    pub trackers: Trackers<T>,
    pub newton_iters: usize,
    pub dt_used: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub final_state: State<T>,
    pub reports: Vec<ReportRow<T>>,
    pub steps: Vec<StepRecord<T>>,
    pub status: RunStatus,
}

impl<T: Real> RunResult<T> {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

/// Advances from `state0` to `t_end`, reporting every `report_every` (and at
/// `t = 0` and `t_end`). Invalid inputs are errors; failures during the run
/// end it early with [`RunStatus::Aborted`] and the partial series.
pub fn run<T: Real>(
    state0: State<T>,
    params: &ModelParams<T>,
    cfg: &SolverConfig<T>,
    t_end: T,
    report_every: T,
) -> Result<RunResult<T>> {
    run_with_observer(state0, params, cfg, t_end, report_every, |_| {})
}

/// As [`run`], calling `observe` with the state at every report.
pub fn run_with_observer<T: Real>(
    state0: State<T>,
    params: &ModelParams<T>,
    cfg: &SolverConfig<T>,
    t_end: T,
    report_every: T,
    mut observe: impl FnMut(&State<T>),
) -> Result<RunResult<T>> {
    params.validate()?;
    cfg.validate()?;
    if !(t_end >= T::zero()) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end must be finite and nonnegative, got {t_end}")));
    }
    if !(report_every > T::zero()) {
        return Err(Error::InvalidParameter(format!("report_every must be positive, got {report_every}")));
    }
    let battery = TestBattery::standard(state0.phi.grid());
    let mut state = state0;
    let mut energy = energy_report(state.t, &state.phi, &state.sigma, &state.mu, params)?;
    let mut trackers = Trackers::start(&energy);
    let mass_phi0 = integrate(&state.phi);
    let mut reports = vec![ReportRow {
        energy,
        energy_law_residual: T::zero(),
        entropy_identity_residual: T::zero(),
        trackers,
        newton_iters: 0,
        dt_used: T::zero(),
    }];
    observe(&state);
    let mut steps = Vec::new();
    let mut dt = cfg.dt;
    let mut easy_streak = 0usize;
    let mut next_report_index = 1usize;
    let tol_t = T::lit(1e-12) * T::one().max(t_end);

    let status = 'outer: loop {
        if state.t >= t_end - tol_t {
            break RunStatus::Completed;
        }
        let target = (report_every * T::from_usize_lossy(next_report_index)).min(t_end);
        let mut rejections = 0usize;
        let (outcome, h) = loop {
            let remaining = target - state.t;
            let h = if remaining <= dt * (T::one() + T::lit(1e-9)) { remaining } else { dt };
            match step(&state, params, &cfg.newton, h) {
                Ok(out) => break (out, h),
                Err(e) if e.is_step_rejection() => {
                    rejections += 1;
                    easy_streak = 0;
                    dt = dt * T::half();
                    if dt < cfg.dt_min {
                        break 'outer RunStatus::Aborted(format!(
                            "step rejected at t = {} with dt below dt_min = {}: {e}",
                            state.t, cfg.dt_min
                        ));
                    }
                }
                Err(e) => break 'outer RunStatus::Aborted(format!("step failed at t = {}: {e}", state.t)),
            }
        };
        let mut next = outcome.state;
        let landed = (target - next.t).abs() <= tol_t;
        if landed {
            next.t = target;
        }
        let checked = (|| -> Result<StepRecord<T>> {
            check_step_invariants(&state.phi, &next.phi, &next.sigma, params, cfg.mass_tol)?;
            let new_energy = energy_report(next.t, &next.phi, &next.sigma, &next.mu, params)?;
            let elr = energy_law_residual(energy.e_total, &new_energy, &next.phi, &next.sigma, params, h)?;
            let eir = entropy_identity_residual(&state.sigma, &next.sigma, &next.phi, params, h)?;
            let weak = weak_residuals(&state.phi, &state.sigma, &next.phi, &next.sigma, &outcome.mu_step, h, params, &battery)?;
            trackers.advance(&new_energy, h)?;
            energy = new_energy;
            Ok(StepRecord {
                t: next.t,
                dt: h,
                newton_iters: outcome.newton_iters,
                rejections,
                energy_law_residual: elr,
                entropy_identity_residual: eir,
                mass_phi_drift: new_energy.mass_phi - mass_phi0,
                mass_sigma: new_energy.mass_sigma,
                min_sigma: new_energy.min_sigma,
                phi_margin: T::one() - next.phi.max_abs(),
                weak_phi: weak.iter().fold(T::zero(), |m, r| m.max(r.phi)),
                weak_sigma: weak.iter().fold(T::zero(), |m, r| m.max(r.sigma)),
            })
        })();
        let record = match checked {
            Ok(r) => r,
            Err(e) => break RunStatus::Aborted(format!("invariant violated at t = {}: {e}", next.t)),
        };
        steps.push(record);
        state = next;

        if outcome.newton_iters <= cfg.easy_iters {
            easy_streak += 1;
            if easy_streak >= cfg.grow_after {
                dt = (dt * cfg.grow_factor).min(cfg.dt_max);
                easy_streak = 0;
            }
        } else {
            easy_streak = 0;
        }

        if landed {
            reports.push(ReportRow {
                energy,
                energy_law_residual: record.energy_law_residual,
                entropy_identity_residual: record.entropy_identity_residual,
                trackers,
                newton_iters: record.newton_iters,
                dt_used: h,
            });
            observe(&state);
            next_report_index += 1;
        }
    };
    Ok(RunResult { final_state: state, reports, steps, status })
}

//! Weak-strong uniqueness experiments at discretization scale.
//!
//! A fine run (the stand-in for the strong solution) and a coarse run start
//! from the same initial data. At each comparison time the fine state is
//! restricted to the coarse grid by cell averaging, and the relative energy
//! `R`, the relative dissipation `W` and the right-hand side of the relative
//! energy inequality are evaluated there. `dR/dt + W - RHS` should be
//! nonpositive up to discretization error, and `R` should stay at the level
//! of the restriction error of the initial data (Grönwall with `R(0) ≈ 0`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functionals::{
    default_weight, relative_dissipation, relative_energy, relative_energy_source, RelEnergyReport,
};
use crate::grid::{Field, GridSpec};
use crate::initial::{PhiInit, SigmaInit};
use crate::model::ModelParams;
use crate::potentials::{fenchel_gap, half_exp_bregman, relative_entropy_density};
use crate::scalar::{ordered_sum, Real};
use crate::solver::{run_with_observer, NewtonOptions, RunStatus, SolverConfig, State};

/// Cell-average restriction of `fine` onto `coarse`; preserves the integral.
pub fn restrict<T: Real>(fine: &Field<T>, coarse: &GridSpec<T>) -> Result<Field<T>> {
    let fg = fine.grid();
    let r = coarse.refinement_factor(fg).ok_or_else(|| {
        Error::IncompatibleGrids(format!("{:?} is not an integer refinement of {:?}", fg.axis_cells(), coarse.axis_cells()))
    })?;
    let [cx, cy] = coarse.cells_per_axis();
    let ry = if coarse.dim() == 2 { r } else { 1 };
    let inv = T::one() / T::from_usize_lossy(r * ry);
    let v = fine.values();
    let mut out = Vec::with_capacity(coarse.num_cells());
    for jy in 0..cy {
        for jx in 0..cx {
            let mut acc = T::zero();
            for fy in jy * ry..(jy + 1) * ry {
                for fx in jx * r..(jx + 1) * r {
                    acc = acc + v[fg.index(fx, fy)];
                }
            }
            out.push(acc * inv);
        }
    }
    Field::from_values(*coarse, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedRunConfig<T> {
    pub params: ModelParams<T>,
    pub phi0: PhiInit<T>,
    pub sigma0: SigmaInit<T>,
    pub coarse_grid: GridSpec<T>,
    pub coarse_dt: T,
    /// Fine cells per coarse cell along each axis.
    pub space_refinement: usize,
    /// Fine steps per coarse step.
    pub time_refinement: usize,
    pub t_end: T,
    pub compare_every: T,
    pub newton: NewtonOptions<T>,
    /// Weight of the `V₀'` part; `None` uses `max{1, χ² max σ̃}` over the series.
    pub m_override: Option<T>,
    pub c_max: T,
    /// Time window of the Grönwall fit.
    pub window: (T, T),
    /// Initial data for the coarse run only (negative controls).
    pub coarse_ic: Option<(PhiInit<T>, SigmaInit<T>)>,
    /// Relative perturbation `σ̃₀ → σ̃₀ (1 + δ)` of the coarse initial nutrient.
    pub perturb_coarse_sigma: T,
}

impl<T: Real> PairedRunConfig<T> {
    pub fn new(
        params: ModelParams<T>,
        phi0: PhiInit<T>,
        sigma0: SigmaInit<T>,
        coarse_grid: GridSpec<T>,
        coarse_dt: T,
        t_end: T,
    ) -> Self {
        Self {
            params,
            phi0,
            sigma0,
            coarse_grid,
            coarse_dt,
            space_refinement: 4,
            time_refinement: 4,
            t_end,
            compare_every: T::lit(0.05).min(t_end.max(coarse_dt)),
            newton: NewtonOptions::default(),
            m_override: None,
            c_max: T::lit(20.0),
            window: (T::zero(), t_end),
            coarse_ic: None,
            perturb_coarse_sigma: T::zero(),
        }
    }

    pub fn fine_grid(&self) -> Result<GridSpec<T>> {
        let cells: Vec<usize> = self.coarse_grid.axis_cells().iter().map(|&c| c * self.space_refinement).collect();
        GridSpec::from_axes(&cells, &self.coarse_grid.lengths())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.space_refinement == 0 || self.time_refinement == 0 {
            return Err(Error::InvalidParameter("refinement factors must be at least 1".into()));
        }
        if !(self.coarse_dt > T::zero()) || !(self.t_end >= T::zero()) || !(self.compare_every > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "need dt > 0, t_end >= 0, compare_every > 0 (dt={}, t_end={}, compare_every={})",
                self.coarse_dt, self.t_end, self.compare_every
            )));
        }
        if let Some(m) = self.m_override {
            if !(m > T::zero()) {
                return Err(Error::InvalidParameter(format!("M must be positive, got {m}")));
            }
        }
        if !(self.c_max >= T::zero()) || !(self.window.1 >= self.window.0) {
            return Err(Error::InvalidParameter("need c_max >= 0 and an ordered window".into()));
        }
        Ok(())
    }
}

/// Coarse states and restricted fine states at the shared comparison times.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTrajectories<T> {
    pub times: Vec<T>,
    pub coarse: Vec<(Field<T>, Field<T>)>,
    pub fine: Vec<(Field<T>, Field<T>)>,
    pub coarse_steps: usize,
    pub fine_steps: usize,
}

fn collect_run<T: Real>(
    state: State<T>,
    params: &ModelParams<T>,
    cfg: &SolverConfig<T>,
    t_end: T,
    every: T,
) -> Result<(Vec<(T, Field<T>, Field<T>)>, usize)> {
    let mut out = Vec::new();
    let res = run_with_observer(state, params, cfg, t_end, every, |s| out.push((s.t, s.phi.clone(), s.sigma.clone())))?;
    if let RunStatus::Aborted(why) = res.status {
        return Err(Error::RunAborted(why));
    }
    Ok((out, res.steps.len()))
}

/// Runs the fine and coarse trajectories (concurrently) and aligns them.
pub fn run_pair<T: Real>(cfg: &PairedRunConfig<T>) -> Result<PairedTrajectories<T>> {
    cfg.validate()?;
    let cg = cfg.coarse_grid;
    let fg = cfg.fine_grid()?;
    let fine_phi0 = cfg.phi0.sample(&fg)?;
    let fine_sigma0 = cfg.sigma0.sample(&fg)?;
    let (coarse_phi0, mut coarse_sigma0) = match &cfg.coarse_ic {
        Some((p, s)) => (p.sample(&cg)?, s.sample(&cg)?),
        None => (cfg.phi0.sample(&cg)?, cfg.sigma0.sample(&cg)?),
    };
    if cfg.perturb_coarse_sigma != T::zero() {
        let f = T::one() + cfg.perturb_coarse_sigma;
        coarse_sigma0 = coarse_sigma0.map(|s| s * f);
    }
    let coarse_state = State::initial(coarse_phi0, coarse_sigma0, &cfg.params)?;
    let fine_state = State::initial(fine_phi0, fine_sigma0, &cfg.params)?;

    let coarse_cfg = fixed_config(cfg.coarse_dt, cfg.newton);
    let fine_cfg = fixed_config(cfg.coarse_dt / T::from_usize_lossy(cfg.time_refinement), cfg.newton);
    let (coarse, fine) = std::thread::scope(|scope| {
        let fine_job = scope.spawn(|| collect_run(fine_state, &cfg.params, &fine_cfg, cfg.t_end, cfg.compare_every));
        let coarse = collect_run(coarse_state, &cfg.params, &coarse_cfg, cfg.t_end, cfg.compare_every);
        let fine = fine_job.join().unwrap_or_else(|_| Err(Error::RunAborted("fine run panicked".into())));
        (coarse, fine)
    });
    let (coarse, coarse_steps) = coarse?;
    let (fine, fine_steps) = fine?;
    if coarse.len() != fine.len() {
        return Err(Error::RunAborted(format!("report counts differ: coarse {}, fine {}", coarse.len(), fine.len())));
    }
    let mut times = Vec::with_capacity(coarse.len());
    let mut c_states = Vec::with_capacity(coarse.len());
    let mut f_states = Vec::with_capacity(coarse.len());
    for ((tc, pc, sc), (tf, pf, sf)) in coarse.into_iter().zip(fine) {
        if (tc - tf).abs() > T::lit(1e-9) * T::one().max(tc.abs()) {
            return Err(Error::RunAborted(format!("comparison times differ: {tc} vs {tf}")));
        }
        times.push(tc);
        c_states.push((pc, sc));
        f_states.push((restrict(&pf, &cg)?, restrict(&sf, &cg)?));
    }
    Ok(PairedTrajectories { times, coarse: c_states, fine: f_states, coarse_steps, fine_steps })
}

fn fixed_config<T: Real>(dt: T, newton: NewtonOptions<T>) -> SolverConfig<T> {
    let mut c = SolverConfig::fixed(dt);
    c.newton = newton;
    c
}

/// Relative energy between the coarse sampling and the restricted fine
/// sampling of the shared initial data, i.e. the pure restriction error.
/// Coarse-only overrides and perturbations are ignored: this is the level a
/// same-data pair should stay at.
pub fn restriction_floor<T: Real>(cfg: &PairedRunConfig<T>, m: T) -> Result<T> {
    let cg = cfg.coarse_grid;
    let fg = cfg.fine_grid()?;
    Ok(relative_energy(
        &cfg.phi0.sample(&cg)?,
        &cfg.sigma0.sample(&cg)?,
        &restrict(&cfg.phi0.sample(&fg)?, &cg)?,
        &restrict(&cfg.sigma0.sample(&fg)?, &cg)?,
        m,
    )?
    .r)
}

/// `M` used for a whole series: `max{1, χ² max_t max σ̃}`.
pub fn series_weight<T: Real>(traj: &PairedTrajectories<T>, chi: T) -> T {
    traj.fine.iter().fold(T::one(), |m, (_, s)| m.max(default_weight(chi, s)))
}

/// `R` and `W` at each comparison time.
pub fn relative_energy_series<T: Real>(
    traj: &PairedTrajectories<T>,
    params: &ModelParams<T>,
    m: T,
) -> Result<Vec<RelEnergyReport<T>>> {
    traj.times
        .iter()
        .zip(traj.coarse.iter().zip(&traj.fine))
        .map(|(&t, ((p, s), (pr, sr)))| {
            let mut rep = relative_energy(p, s, pr, sr, m)?;
            rep.t = t;
            rep.w = relative_dissipation(p, s, pr, sr, params.chi, params.lambda, m)?;
            Ok(rep)
        })
        .collect()
}

/// Right-hand side of the relative energy inequality at each comparison time.
pub fn relenin_rhs_series<T: Real>(traj: &PairedTrajectories<T>, params: &ModelParams<T>, m: T) -> Result<Vec<T>> {
    traj.coarse
        .iter()
        .zip(&traj.fine)
        .map(|((p, s), (pr, sr))| relative_energy_source(p, s, pr, sr, params, m))
        .collect()
}

/// `dR/dt + W - RHS` with central differences inside the series and
/// one-sided ones at its ends.
pub fn relenin_residuals<T: Real>(series: &[RelEnergyReport<T>], rhs: &[T]) -> Vec<T> {
    let n = series.len();
    (0..n)
        .map(|k| {
            let drdt = if n < 2 {
                T::zero()
            } else {
                let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
                (series[b].r - series[a].r) / (series[b].t - series[a].t)
            };
            drdt + series[k].w - rhs[k]
        })
        .collect()
}

/// Largest value and nearest-rank 95th percentile of the positive parts.
pub fn positive_part_stats<T: Real>(values: &[T]) -> (T, T) {
    let mut pos: Vec<T> = values.iter().map(|v| v.max(T::zero())).collect();
    if pos.is_empty() {
        return (T::zero(), T::zero());
    }
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let rank = ((0.95 * pos.len() as f64).ceil() as usize).clamp(1, pos.len());
    (pos[pos.len() - 1], pos[rank - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallVerdict<T> {
    /// Smallest `C ≥ 0` with `R(t) ≤ R(0) e^{Ct} + floor` on the window.
    pub c_est: T,
    pub max_r: T,
    pub floor: T,
    pub pass: bool,
}

/// Fits `R(t) ≤ R(0) e^{Ct} + floor` on `window` and checks `C ≤ c_max` and
/// `max R ≤ 10 · floor`.
pub fn gronwall_check<T: Real>(times: &[T], r: &[T], floor: T, c_max: T, window: (T, T)) -> GronwallVerdict<T> {
    let r0 = r.first().copied().unwrap_or(T::zero());
    let mut c_est = T::zero();
    let mut max_r = T::zero();
    for (&t, &rv) in times.iter().zip(r) {
        if t < window.0 || t > window.1 {
            continue;
        }
        max_r = max_r.max(rv);
        if t > T::zero() && rv > floor {
            let c = if r0 > T::zero() { ((rv - floor) / r0).ln() / t } else { T::infinity() };
            c_est = c_est.max(c);
        }
    }
    let pass = c_est <= c_max && max_r <= T::lit(10.0) * floor;
    GronwallVerdict { c_est, max_r, floor, pass }
}

/// Everything a paired experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct WsuReport<T> {
    pub series: Vec<RelEnergyReport<T>>,
    pub rhs: Vec<T>,
    pub relenin: Vec<T>,
    pub relenin_max_pos: T,
    pub relenin_p95_pos: T,
    pub m: T,
    pub floor: T,
    pub gronwall: GronwallVerdict<T>,
    pub coarse_steps: usize,
    pub fine_steps: usize,
}

pub fn run_wsu<T: Real>(cfg: &PairedRunConfig<T>) -> Result<WsuReport<T>> {
    let traj = run_pair(cfg)?;
    let m = cfg.m_override.unwrap_or_else(|| series_weight(&traj, cfg.params.chi));
    let series = relative_energy_series(&traj, &cfg.params, m)?;
    let rhs = relenin_rhs_series(&traj, &cfg.params, m)?;
    let relenin = relenin_residuals(&series, &rhs);
    let (relenin_max_pos, relenin_p95_pos) = positive_part_stats(&relenin);
    let floor = restriction_floor(cfg, m)?;
    let times: Vec<T> = series.iter().map(|s| s.t).collect();
    let rs: Vec<T> = series.iter().map(|s| s.r).collect();
    let gronwall = gronwall_check(&times, &rs, floor, cfg.c_max, cfg.window);
    Ok(WsuReport {
        series,
        rhs,
        relenin,
        relenin_max_pos,
        relenin_p95_pos,
        m,
        floor,
        gronwall,
        coarse_steps: traj.coarse_steps,
        fine_steps: traj.fine_steps,
    })
}

/// Outcome of one sampled inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: &'static str,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `(rhs - lhs) / scale` seen; negative values beyond rounding are violations.
    pub worst_margin: f64,
    pub first_violation: Option<Vec<f64>>,
}

struct Tally {
    name: &'static str,
    samples: usize,
    violations: usize,
    worst: f64,
    first: Option<Vec<f64>>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, samples: 0, violations: 0, worst: f64::INFINITY, first: None }
    }

    /// Records `gap ≥ 0` with a rounding allowance proportional to `scale`.
    fn record<T: Real>(&mut self, gap: T, scale: T, tuple: &[T]) {
        self.samples += 1;
        let scale = scale.max(T::min_positive_value());
        let margin = (gap / scale).to_f64_lossy();
        self.worst = self.worst.min(margin);
        let allowance = T::lit(64.0) * T::epsilon() * scale;
        if !(gap >= -allowance) {
            self.violations += 1;
            if self.first.is_none() {
                self.first = Some(tuple.iter().map(|v| v.to_f64_lossy()).collect());
            }
        }
    }

    fn finish(self) -> InequalityReport {
        InequalityReport {
            name: self.name,
            samples: self.samples,
            violations: self.violations,
            worst_margin: self.worst,
            first_violation: self.first,
        }
    }
}

/// Samples admissible tuples and checks, each `samples` times:
///
/// * `(σ - σ̃)(φ - φ̃) ≤ 4 (σ̃ |φ - φ̃|² + σ - σ̃ - σ̃ ln(σ/σ̃))` for `|φ|, |φ̃| < 1`;
/// * `(√σ - √σ̃)² ≤ σ - σ̃ - σ̃ ln(σ/σ̃)`;
/// * `Λ(ln σ | ln σ̃) ≥ 0`;
/// * the Fenchel–Young gap for random `r`, `|w|, |w̃| < r`;
/// * pointwise Young absorption `σ̃a² - χσ̃ab + Mb² ≥ ½σ̃a² + (M/2)b²` for `M ≥ χ²σ̃`.
pub fn pointwise_inequality_suite<T: Real>(samples: usize, seed: u64) -> Vec<InequalityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cross = Tally::new("cross_term_bound");
    let mut sqrtdiff = Tally::new("sqrt_difference_bound");
    let mut lambda = Tally::new("half_exp_bregman_nonnegative");
    let mut fenchel = Tally::new("fenchel_young_gap");
    let mut young = Tally::new("young_absorption");
    let open = |rng: &mut ChaCha8Rng| -> T {
        let v: f64 = rng.gen_range(-1.0..1.0);
        T::lit(v)
    };
    // Log-uniform concentrations over many decades.
    let conc = |rng: &mut ChaCha8Rng| -> T { T::lit(rng.gen_range(-12.0f64..12.0).exp()) };
    for _ in 0..samples {
        let (p, q) = (open(&mut rng), open(&mut rng));
        let (s, r) = (conc(&mut rng), conc(&mut rng));
        let kl = relative_entropy_density(s, r);
        let dp = p - q;
        let ds = s - r;

        let four = T::lit(4.0);
        let rhs = four * (r * dp * dp + kl);
        let lhs = ds * dp;
        cross.record(rhs - lhs, rhs.abs() + lhs.abs(), &[p, q, s, r]);

        let root = ds / (s.sqrt() + r.sqrt());
        let sq = root * root;
        sqrtdiff.record(kl - sq, kl.abs() + sq, &[s, r]);

        let (u, v) = (s.ln(), r.ln());
        let b = half_exp_bregman(u, v);
        lambda.record(b, (T::half() * u).exp() + (T::half() * v).exp(), &[u, v]);

        let rad = T::lit(rng.gen_range(-3.0f64..3.0).exp());
        let (w, wr) = (open(&mut rng) * rad, open(&mut rng) * rad);
        if let Ok(gap) = fenchel_gap(rad, w, wr, s, r) {
            let k = (four * rad).recip().max(four * rad);
            let dw = w - wr;
            let scale = k * (r * dw * dw + kl) + (dw * ds).abs();
            fenchel.record(gap, scale, &[rad, w, wr, s, r]);
        }

        let chi = T::lit(rng.gen_range(0.0..5.0));
        let st = T::lit(rng.gen_range(-6.0f64..6.0).exp());
        let m = T::one().max(chi * chi * st);
        let a = T::lit(rng.gen_range(-10.0..10.0));
        let bb = T::lit(rng.gen_range(-10.0..10.0));
        let full = st * a * a - chi * st * a * bb + m * bb * bb;
        let absorbed = T::half() * st * a * a + T::half() * m * bb * bb;
        young.record(full - absorbed, st * a * a + (chi * st * a * bb).abs() + m * bb * bb, &[chi, st, m, a, bb]);
    }
    vec![cross.finish(), sqrtdiff.finish(), lambda.finish(), fenchel.finish(), young.finish()]
}

/// Sum of `R` over a series, handy for comparing refinements.
pub fn max_relative_energy<T: Real>(series: &[RelEnergyReport<T>]) -> T {
    series.iter().fold(T::zero(), |m, s| m.max(s.r))
}

#[doc(hidden)]
pub fn total_relative_energy<T: Real>(series: &[RelEnergyReport<T>]) -> T {
    ordered_sum(series.iter().map(|s| s.r))
}

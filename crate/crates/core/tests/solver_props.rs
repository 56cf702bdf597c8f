use chks_core::benchmark::Benchmark;
use chks_core::grid::integrate;
use chks_core::initial::{PhiInit, SigmaInit};
use chks_core::model::ReactionSplit;
use chks_core::solver::{run, SolverConfig};
use chks_core::State;
use chks_core::wsu::{max_relative_energy, run_wsu, PairedRunConfig};
use chks_core::{AlphaSpec, GridSpec, ModelParams};
use proptest::prelude::*;

fn random_state(grid: GridSpec, seed: u64, params: &ModelParams) -> State {
    let phi = PhiInit::RandomPerturbation { mean: 0.05, amplitude: 0.5, seed }.sample(&grid).unwrap();
    let sigma = SigmaInit::RandomPositive { seed: seed ^ 0xabc, floor: 0.2 }.sample(&grid).unwrap();
    State::initial(phi, sigma, params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decoupled_energy_is_nonincreasing(seed in any::<u64>(), two_d in any::<bool>()) {
        let grid = if two_d { GridSpec::new_2d(10, 8, 1.0, 0.8).unwrap() } else { GridSpec::new_1d(32, 2.0).unwrap() };
        let params = ModelParams::new(0.0, 0.7, AlphaSpec::Constant(0.0));
        let res = run(random_state(grid, seed, &params), &params, &SolverConfig::fixed(1e-3), 0.05, 0.005).unwrap();
        prop_assert!(res.completed());
        for w in res.reports.windows(2) {
            prop_assert!(w[1].energy.e_total <= w[0].energy.e_total + 1e-12);
            // Pure σ flow: ∫σ(ln σ - 1) decreases on its own.
            prop_assert!(w[1].energy.parts.sigma_entropy <= w[0].energy.parts.sigma_entropy + 1e-12);
        }
    }

    #[test]
    fn accepted_steps_keep_invariants(seed in any::<u64>(), chi in 0.0f64..3.0, logistic in any::<bool>()) {
        let grid = GridSpec::new_1d(24, 1.5).unwrap();
        let alpha = if logistic { AlphaSpec::logistic(1.0, 1.0).unwrap() } else { AlphaSpec::Constant(-1.0) };
        let params = ModelParams::new(chi, 0.5, alpha);
        let s0 = random_state(grid, seed, &params);
        let m0 = integrate(&s0.phi);
        let res = run(s0, &params, &SolverConfig::fixed(2e-3), 0.1, 0.05).unwrap();
        prop_assert!(res.completed(), "{:?}", res.status);
        for s in &res.steps {
            prop_assert!(s.min_sigma > 0.0);
            prop_assert!(s.phi_margin >= params.delta_safe);
            prop_assert!(s.mass_phi_drift.abs() <= 1e-9 * grid.measure());
        }
        prop_assert!((integrate(&res.final_state.phi) - m0).abs() <= 1e-9 * grid.measure());
    }
}

#[test]
fn benchmark_runs_are_bit_identical() {
    let mut b = Benchmark::<f64>::smooth();
    b.t_end = 0.2;
    let x = b.run(b.dt).unwrap();
    let y = b.run(b.dt).unwrap();
    assert_eq!(x, y);
}

#[test]
fn constant_rate_mass_bracket() {
    let grid = GridSpec::new_1d(32, 1.0).unwrap();
    let tau = 1e-2;
    for &c in &[-1.0, 0.0, 0.5] {
        let params = ModelParams::new(1.0, 0.5, AlphaSpec::Constant(c));
        let res = run(random_state(grid, 4, &params), &params, &SolverConfig::fixed(tau), 1.0, 0.1).unwrap();
        let m0 = res.reports[0].energy.mass_sigma;
        for r in &res.reports {
            let ratio = r.energy.mass_sigma / m0 / (c * r.energy.t).exp();
            assert!((ratio - 1.0).abs() <= 5.0 * tau, "c = {c}, t = {}, ratio {ratio}", r.energy.t);
        }
    }
}

#[test]
fn negative_constant_rate_is_split_independent() {
    let grid = GridSpec::new_1d(16, 1.0).unwrap();
    let split = ModelParams::new(0.5, 0.0, AlphaSpec::Constant(-0.8));
    let implicit = split.clone().with_reaction(ReactionSplit::Implicit);
    let a = run(random_state(grid, 9, &split), &split, &SolverConfig::fixed(1e-3), 0.1, 0.1).unwrap();
    let b = run(random_state(grid, 9, &implicit), &implicit, &SolverConfig::fixed(1e-3), 0.1, 0.1).unwrap();
    // Negative constant rates are implicit in both modes.
    assert_eq!(a.final_state, b.final_state);
}

#[test]
fn single_precision_run() {
    let grid = chks_core::GridSpec32::new_1d(16, 1.0).unwrap();
    let params = chks_core::ModelParams32::new(1.0, 0.5, chks_core::potentials::AlphaSpec::Constant(0.0));
    let phi = PhiInit::<f32>::RandomPerturbation { mean: 0.0, amplitude: 0.3, seed: 1 }.sample(&grid).unwrap();
    let sigma = SigmaInit::<f32>::Constant(1.0).sample(&grid).unwrap();
    let mut cfg = chks_core::SolverConfig32::fixed(1e-3);
    cfg.newton.tol = 1e-5;
    cfg.mass_tol = 1e-5;
    let res = run(chks_core::solver::State::initial(phi, sigma, &params).unwrap(), &params, &cfg, 0.01, 0.01).unwrap();
    assert!(res.completed(), "{:?}", res.status);
}

#[test]
fn identical_pair_has_zero_relative_energy() {
    let b = Benchmark::<f64>::smooth();
    let mut cfg = PairedRunConfig::new(b.params.clone(), b.phi0.clone(), b.sigma0.clone(), b.grid, 1e-2, 0.2);
    cfg.space_refinement = 1;
    cfg.time_refinement = 1;
    let rep = run_wsu(&cfg).unwrap();
    assert!(max_relative_energy(&rep.series) <= 1e-12);
    assert!(rep.gronwall.pass);
}

#[test]
fn perturbed_coarse_nutrient_matches_taylor_oracle() {
    let b = Benchmark::<f64>::smooth();
    let mut cfg = PairedRunConfig::new(b.params.clone(), b.phi0.clone(), b.sigma0.clone(), b.grid, 1e-2, 0.0);
    cfg.space_refinement = 1;
    cfg.time_refinement = 1;
    cfg.perturb_coarse_sigma = 0.01;
    let rep = run_wsu(&cfg).unwrap();
    // KL(σ̃(1+δ) | σ̃) ≈ ½ δ² ∫σ̃ to leading order.
    let mass = integrate(&b.sigma0.sample(&b.grid).unwrap());
    let oracle = 0.5 * 1e-4 * mass;
    assert!((rep.series[0].r - oracle).abs() <= 0.01 * oracle, "{} vs {oracle}", rep.series[0].r);
}

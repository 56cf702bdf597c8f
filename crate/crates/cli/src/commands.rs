use std::cell::RefCell;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use chks_core::checks::{run_checks, CheckOptions, Mutation};
use chks_core::initial::ic_report;
use chks_core::solver::{run_with_observer, RunResult, RunStatus};
use chks_core::State;
use chks_core::wsu::run_wsu;
use chks_core::Error;

use crate::config::{ConfigError, RunConfig, SnapshotFormat};
use crate::output::{
    fmt_f64, resolve_dir, unix_seconds, write_json, write_snapshot_binary, write_snapshot_text, write_table, write_timeseries,
    write_wsu_csv, Manifest,
};

pub const EXIT_OK: i32 = 0;
/// Invalid configuration or initial data, or an output I/O failure.
pub const EXIT_CONFIG: i32 = 1;
/// Aborted run, failed sweep cell, or failed check.
pub const EXIT_FAILED: i32 = 2;
/// The paired-run verdict is FAIL.
pub const EXIT_WSU_FAIL: i32 = 3;

/// What a single run reports back to a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub exit_code: i32,
    pub status: String,
    pub reason: Option<String>,
    pub steps: usize,
    pub t_final: f64,
    pub min_sigma: f64,
    pub max_mass_phi_drift: f64,
    pub energy_law_residual_pos_max: f64,
    pub entropy_identity_residual_max: f64,
    pub e_total_final: f64,
}

impl RunSummary {
    fn failed(exit_code: i32, status: &str, reason: String) -> Self {
        Self {
            exit_code,
            status: status.into(),
            reason: Some(reason),
            steps: 0,
            t_final: f64::NAN,
            min_sigma: f64::NAN,
            max_mass_phi_drift: f64::NAN,
            energy_law_residual_pos_max: f64::NAN,
            entropy_identity_residual_max: f64::NAN,
            e_total_final: f64::NAN,
        }
    }

    fn of(res: &RunResult<f64>) -> Self {
        let (exit_code, status, reason) = match &res.status {
            RunStatus::Completed => (EXIT_OK, "completed", None),
            RunStatus::Aborted(why) => (EXIT_FAILED, "aborted", Some(why.clone())),
        };
        let fold = |f: &dyn Fn(&chks_core::solver::StepRecord<f64>) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
            res.steps.iter().map(f).fold(init, pick)
        };
        let first = &res.reports[0].energy;
        Self {
            exit_code,
            status: status.into(),
            reason,
            steps: res.steps.len(),
            t_final: res.final_state.t,
            min_sigma: fold(&|s| s.min_sigma, first.min_sigma, f64::min),
            max_mass_phi_drift: fold(&|s| s.mass_phi_drift.abs(), 0.0, f64::max),
            energy_law_residual_pos_max: fold(&|s| s.energy_law_residual.max(0.0), 0.0, f64::max),
            entropy_identity_residual_max: fold(&|s| s.entropy_identity_residual, 0.0, f64::max),
            e_total_final: res.reports.last().map_or(f64::NAN, |r| r.energy.e_total),
        }
    }
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn io_failure(e: std::io::Error, dir: &Path) -> RunSummary {
    RunSummary::failed(EXIT_CONFIG, "error", format!("output error in {}: {e}", dir.display()))
}

/// Runs one simulation into `dir` (already resolved).
pub fn run_into(cfg: &RunConfig, dir: &Path) -> RunSummary {
    let start = unix_seconds();
    let prepared = (|| -> Result<(State, chks_core::ModelParams, serde_json::Value), ConfigError> {
        let params = cfg.params()?;
        let (phi, sigma) = cfg.initial_fields(&cfg.ic)?;
        let rep = ic_report(&phi, &sigma)?;
        if !rep.admissible() {
            return Err(ConfigError::Invalid(format!(
                "initial data violate |mean phi0| < 1 or finiteness of the sigma0 integrals: {rep:?}"
            )));
        }
        let info = json!({
            "mean_phi0": rep.mean_phi,
            "min_sigma0": rep.min_sigma,
            "sigma0_log_moment": rep.sigma_log_moment,
            "gamma_hat_ln_sigma0": rep.gamma_hat_ln_sigma,
        });
        Ok((State::initial(phi, sigma, &params)?, params, info))
    })();
    let (state, params, mut info) = match prepared {
        Ok(p) => p,
        Err(e) => return RunSummary::failed(EXIT_CONFIG, "error", e.to_string()),
    };
    if let Err(e) = std::fs::create_dir_all(dir) {
        return io_failure(e, dir);
    }

    let snap_dir = dir.join("snapshots");
    let snap_err: RefCell<Option<std::io::Error>> = RefCell::new(None);
    let mut index = 0usize;
    if cfg.output.snapshots != SnapshotFormat::None {
        if let Err(e) = std::fs::create_dir_all(&snap_dir) {
            return io_failure(e, dir);
        }
    }
    let observe = |s: &State| {
        let write = |name: &str, f: &chks_core::Field| match cfg.output.snapshots {
            SnapshotFormat::None => Ok(()),
            SnapshotFormat::Text => write_snapshot_text(&snap_dir.join(format!("{name}_{index:06}.txt")), f, s.t),
            SnapshotFormat::Binary => write_snapshot_binary(&snap_dir.join(format!("{name}_{index:06}.bin")), f, s.t),
        };
        if let Err(e) = write("phi", &s.phi).and_then(|_| write("sigma", &s.sigma)) {
            snap_err.borrow_mut().get_or_insert(e);
        }
        index += 1;
    };
    let result = run_with_observer(
        state,
        &params,
        &cfg.solver_config(),
        cfg.time.t_end,
        cfg.time.report_every,
        observe,
    );
    let res = match result {
        Ok(r) => r,
        Err(e) => return RunSummary::failed(EXIT_CONFIG, "error", e.to_string()),
    };
    if let Some(e) = snap_err.into_inner() {
        return io_failure(e, dir);
    }
    let summary = RunSummary::of(&res);
    if let Err(e) = write_timeseries(&dir.join("timeseries.csv"), &res.reports) {
        return io_failure(e, dir);
    }
    info["steps"] = json!(summary.steps);
    info["rejections"] = json!(res.steps.iter().map(|s| s.rejections).sum::<usize>());
    info["t_final"] = json!(summary.t_final);
    info["reports"] = json!(res.reports.len());
    let manifest = Manifest {
        command: "run".into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config_json(cfg),
        seeds: cfg.seeds(),
        start_unix: start,
        end_unix: unix_seconds(),
        status: summary.status.clone(),
        exit_code: summary.exit_code,
        failure_reason: summary.reason.clone(),
        info,
    };
    if let Err(e) = write_json(&dir.join("manifest.json"), &manifest) {
        return io_failure(e, dir);
    }
    summary
}

fn output_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    resolve_dir(out.unwrap_or(&cfg.output.dir))
}

fn load(path: &Path) -> Result<RunConfig, i32> {
    RunConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}

pub fn cmd_run(config: &Path, out: Option<&Path>) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let dir = output_dir(&cfg, out);
    let s = run_into(&cfg, &dir);
    report_run(&s, &dir);
    s.exit_code
}

fn report_run(s: &RunSummary, dir: &Path) {
    match &s.reason {
        None => eprintln!("completed: {} steps to t = {}, output in {}", s.steps, s.t_final, dir.display()),
        Some(r) => eprintln!("{}: {r}", s.status),
    }
}

pub fn cmd_wsu(config: &Path, out: Option<&Path>) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let dir = output_dir(&cfg, out);
    let start = unix_seconds();
    let paired = match cfg.paired_config() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (code, status, reason, info) = match run_wsu(&paired) {
        Ok(rep) => {
            if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| write_wsu_csv(&dir.join("wsu.csv"), &rep)) {
                eprintln!("error: {}", io_failure(e, &dir).reason.unwrap_or_default());
                return EXIT_CONFIG;
            }
            let g = &rep.gronwall;
            let verdict = json!({
                "verdict": if g.pass { "PASS" } else { "FAIL" },
                "c_est": g.c_est,
                "c_max": paired.c_max,
                "max_r": g.max_r,
                "floor": g.floor,
                "max_r_over_floor": if g.floor > 0.0 { g.max_r / g.floor } else { f64::NAN },
                "window": [paired.window.0, paired.window.1],
                "m": rep.m,
                "relenin_max_pos": rep.relenin_max_pos,
                "relenin_p95_pos": rep.relenin_p95_pos,
                "coarse_steps": rep.coarse_steps,
                "fine_steps": rep.fine_steps,
            });
            if let Err(e) = write_json(&dir.join("verdict.json"), &verdict) {
                eprintln!("error: {}", io_failure(e, &dir).reason.unwrap_or_default());
                return EXIT_CONFIG;
            }
            eprintln!(
                "{}: max R = {:e}, floor = {:e}, C_est = {}, relenin+ max = {:e}",
                if g.pass { "PASS" } else { "FAIL" },
                g.max_r,
                g.floor,
                g.c_est,
                rep.relenin_max_pos
            );
            let code = if g.pass { EXIT_OK } else { EXIT_WSU_FAIL };
            (code, if g.pass { "pass" } else { "fail" }, None, verdict)
        }
        Err(Error::RunAborted(why)) => {
            eprintln!("aborted: {why}");
            (EXIT_FAILED, "aborted", Some(why), serde_json::Value::Null)
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let manifest = Manifest {
        command: "wsu".into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config_json(&cfg),
        seeds: cfg.seeds(),
        start_unix: start,
        end_unix: unix_seconds(),
        status: status.into(),
        exit_code: code,
        failure_reason: reason,
        info,
    };
    if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| write_json(&dir.join("manifest.json"), &manifest)) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    code
}

/// One cell of a sweep: the override values and the resulting config.
fn sweep_cells(
    base: &RunConfig,
    overrides: &[(String, Vec<toml::Value>)],
) -> Vec<(Vec<toml::Value>, Result<RunConfig, ConfigError>)> {
    let mut combos: Vec<Vec<toml::Value>> = vec![vec![]];
    for (_, values) in overrides {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut next = c.clone();
                    next.push(v.clone());
                    next
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|combo| {
            let cfg = overrides
                .iter()
                .zip(&combo)
                .try_fold(base.clone(), |cfg, ((key, _), v)| cfg.with_override(key, v));
            (combo, cfg)
        })
        .collect()
}

pub fn cmd_sweep(config: &Path, sets: &[String], out: Option<&Path>, jobs: Option<usize>) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mut overrides = Vec::new();
    for s in sets {
        match crate::config::parse_override(s) {
            Ok(o) => overrides.push(o),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    }
    if overrides.is_empty() {
        return cmd_run(config, out);
    }
    let base = output_dir(&cfg, out);
    let start = unix_seconds();
    let cells = sweep_cells(&cfg, &overrides);
    let work = || -> Vec<RunSummary> {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, (_, c))| match c {
                Ok(c) => run_into(c, &base.join(format!("cell_{i:03}"))),
                Err(e) => RunSummary::failed(EXIT_CONFIG, "error", e.to_string()),
            })
            .collect()
    };
    let summaries = match jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => {
                eprintln!("error: cannot start worker pool: {e}");
                return EXIT_CONFIG;
            }
        },
        None => work(),
    };

    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(overrides.iter().map(|(k, _)| k.clone()));
    header.extend(
        [
            "status",
            "exit_code",
            "steps",
            "t_final",
            "min_sigma",
            "max_mass_phi_drift",
            "energy_law_residual_pos_max",
            "entropy_identity_residual_max",
            "E_total_final",
            "reason",
        ]
        .map(String::from),
    );
    let rows: Vec<Vec<String>> = cells
        .iter()
        .zip(&summaries)
        .enumerate()
        .map(|(i, ((combo, _), s))| {
            let mut row = vec![format!("cell_{i:03}")];
            row.extend(combo.iter().map(|v| v.to_string()));
            row.extend([
                s.status.clone(),
                s.exit_code.to_string(),
                s.steps.to_string(),
                fmt_f64(s.t_final),
                fmt_f64(s.min_sigma),
                fmt_f64(s.max_mass_phi_drift),
                fmt_f64(s.energy_law_residual_pos_max),
                fmt_f64(s.entropy_identity_residual_max),
                fmt_f64(s.e_total_final),
                s.reason.clone().unwrap_or_default(),
            ]);
            row
        })
        .collect();
    let failures = summaries.iter().filter(|s| s.exit_code != EXIT_OK).count();
    let manifest = Manifest {
        command: "sweep".into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config_json(&cfg),
        seeds: cfg.seeds(),
        start_unix: start,
        end_unix: unix_seconds(),
        status: if failures == 0 { "completed".into() } else { "failed".into() },
        exit_code: if failures == 0 { EXIT_OK } else { EXIT_FAILED },
        failure_reason: (failures > 0).then(|| format!("{failures} of {} cells failed", cells.len())),
        info: json!({ "cells": cells.len(), "overrides": sets }),
    };
    let written = std::fs::create_dir_all(&base)
        .and_then(|_| write_table(&base.join("summary.csv"), &header, &rows))
        .and_then(|_| write_json(&base.join("manifest.json"), &manifest));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    for (i, s) in summaries.iter().enumerate() {
        if let Some(r) = &s.reason {
            eprintln!("cell_{i:03} {}: {r}", s.status);
        }
    }
    eprintln!("{} cells, {failures} failed; summary in {}", cells.len(), base.join("summary.csv").display());
    manifest.exit_code
}

pub fn cmd_check(samples: usize, seed: u64, mutation: Option<Mutation>) -> i32 {
    let results = run_checks(&CheckOptions { inequality_samples: samples, seed, mutation });
    let mut failed = Vec::new();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        if !r.passed {
            failed.push(r.name.as_str());
        }
    }
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        EXIT_OK
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        EXIT_FAILED
    }
}

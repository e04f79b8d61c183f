//! Runs a configured experiment and writes its result files.
//!
//! Outputs in the configured directory:
//! - `results.csv`: one row per ladder cell (regime modes only);
//! - `summary.json`: configuration echo, cells and pass/fail checks;
//! - `paths/<mode>-<level>-r<r>.csv`: per-replication grid paths when enabled.
//!
//! File contents depend only on the configuration and seed. Wall-clock
//! timings are kept in the returned report and never written.

use super::config::{ExperimentConfig, Mode};
use super::selfcheck::{algebra_suite, skorohod_suite, CheckOutcome};
use crate::engine::{xi, ClassParams};
use crate::fields::{
    build_regime_fixed_n, build_regime_varying_n, cap_ladder, ClassField, LimitPoint, RateField,
    RegimeLadder, SpherePoint,
};
use crate::limits::skorohod_reflect;
use crate::limits::{cell_path, cell_stream, convergence_experiment, CellReport, ExperimentParams};
use crate::qubit::{coeff_map, SphericalAngles};
use crate::Error;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let src = fs::read_to_string(path)?;
    Ok(super::config::parse_config(&src)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub seed: u64,
    pub reps: usize,
    pub t_star: f64,
    pub r_ladder: Vec<f64>,
    pub levels: Vec<usize>,
    pub theta: f64,
    pub theta_k: Vec<f64>,
    pub oracle_reps: usize,
    pub oracle_steps: usize,
    pub grid_per_unit: f64,
    pub classes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub ladder_max_error: Option<f64>,
    pub cells: Vec<CellReport>,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn echo(cfg: &ExperimentConfig, levels: Vec<usize>) -> ConfigEcho {
    ConfigEcho {
        mode: cfg.mode.to_string(),
        seed: cfg.seed,
        reps: cfg.reps,
        t_star: cfg.t_star,
        r_ladder: cfg.r_ladder.clone(),
        levels,
        theta: cfg.theta,
        theta_k: cfg.theta_sequence(),
        oracle_reps: cfg.oracle_reps,
        oracle_steps: cfg.oracle_steps,
        grid_per_unit: cfg.grid_per_unit,
        classes: cfg.classes.len(),
    }
}

fn field_of(cfg: &ExperimentConfig) -> Result<RateField, Error> {
    Ok(RateField::new(
        cfg.classes
            .iter()
            .map(|c| c.field.clone())
            .collect::<Vec<ClassField>>(),
    )?)
}

/// Regime ladder of a fixed-n or varying-n configuration.
pub fn build_ladder(cfg: &ExperimentConfig) -> Result<RegimeLadder, Error> {
    let field = field_of(cfg)?;
    let specs = cfg.specs();
    let theta_k = cfg.theta_sequence();
    match cfg.mode {
        Mode::FixedN => {
            let center = if cfg.center.is_empty() {
                SpherePoint::new(SphericalAngles::zeros(cfg.n)?)
            } else {
                SpherePoint::from_theta(cfg.n, cfg.center.clone())?
            };
            let caps = cap_ladder(&center, cfg.cap_rho0, cfg.cap_levels)?;
            Ok(build_regime_fixed_n(
                &field,
                &specs,
                cfg.theta,
                &theta_k,
                &cfg.r_ladder,
                &caps,
            )?)
        }
        Mode::VaryingN => {
            let point = LimitPoint::new(cfg.limit_point.clone())?;
            Ok(build_regime_varying_n(
                &point,
                &field,
                &specs,
                cfg.theta,
                &theta_k,
                &cfg.r_ladder,
                &cfg.n_ladder,
                cfg.cap_rho0,
            )?)
        }
        _ => Err(Error::Config(super::ConfigError::ValidationError(
            "mode".into(),
        ))),
    }
}

pub fn experiment_params(cfg: &ExperimentConfig) -> ExperimentParams {
    ExperimentParams {
        reps: cfg.reps,
        t_star: cfg.t_star,
        oracle_reps: cfg.oracle_reps,
        oracle_steps: cfg.oracle_steps,
        grid_per_unit: cfg.grid_per_unit,
        seed: cfg.seed,
    }
}

fn per_level(cells: &[CellReport]) -> Vec<Vec<&CellReport>> {
    let mut out: Vec<Vec<&CellReport>> = Vec::new();
    for c in cells {
        match out.last_mut() {
            Some(row) if row[0].level == c.level => row.push(c),
            _ => out.push(vec![c]),
        }
    }
    out
}

fn outcome(name: &str, cases: usize, failures: usize, max_error: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        pass: cases > 0 && failures == 0,
        cases,
        failures,
        max_error,
    }
}

/// Pass/fail checks derived from the cells of a regime ladder.
pub fn regime_checks(ladder: &RegimeLadder, cells: &[CellReport]) -> Vec<CheckOutcome> {
    let mut checks = Vec::new();
    let err = ladder.max_ladder_error();
    checks.push(outcome(
        "ladder-exact",
        ladder.entries.len(),
        usize::from(!(err < 1e-12)),
        err,
    ));

    let gaps: Vec<f64> = ladder
        .levels()
        .iter()
        .filter_map(|l| ladder.entries.iter().find(|e| e.level == *l))
        .map(|e| (e.theta_k - ladder.theta).abs())
        .collect();
    let bad = gaps.windows(2).filter(|w| !(w[1] < w[0])).count();
    checks.push(outcome(
        "drift-gap-decreasing",
        gaps.len().saturating_sub(1),
        bad,
        0.0,
    ));

    let rows = per_level(cells);
    let mut ks_bad = 0;
    let mut ks_rise = 0.0f64;
    let mut fl_bad = 0;
    for row in &rows {
        for w in row.windows(2) {
            let rise = w[1].comparison.ks - w[0].comparison.ks;
            ks_rise = ks_rise.max(rise);
            if rise > 0.0 {
                ks_bad += 1;
            }
            if !(w[1].fluid_sup_dev < w[0].fluid_sup_dev) {
                fl_bad += 1;
            }
        }
    }
    let steps = rows.iter().map(|r| r.len().saturating_sub(1)).sum();
    checks.push(outcome(
        "ks-nonincreasing-in-r",
        steps,
        ks_bad,
        ks_rise.max(0.0),
    ));
    checks.push(outcome("fluid-decreasing-in-r", steps, fl_bad, 0.0));
    let paths = cells.iter().map(|c| c.reps).sum();
    let viol = cells.iter().map(|c| c.compl_violations).sum();
    let worst = cells
        .iter()
        .map(|c| c.compl_residual_max)
        .fold(0.0, f64::max);
    checks.push(outcome("complementarity", paths, viol, worst));
    checks
}

fn write_results(path: &Path, cells: &[CellReport]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "regime-mode",
        "k-or-n",
        "r",
        "reps",
        "theta_k",
        "sigma2_k",
        "ks_stat",
        "ks_critical_1pct",
        "mean_sim",
        "mean_oracle",
        "var_sim",
        "var_oracle",
        "compl_residual",
        "fluid_sup_dev",
    ])?;
    for c in cells {
        let m = &c.comparison;
        w.write_record([
            c.mode.to_string(),
            c.level.to_string(),
            c.r.to_string(),
            c.reps.to_string(),
            c.theta_k.to_string(),
            c.sigma2_k.to_string(),
            m.ks.to_string(),
            m.ks_critical_1pct.to_string(),
            m.mean_a.to_string(),
            m.mean_b.to_string(),
            m.var_a.to_string(),
            m.var_b.to_string(),
            c.compl_residual_max.to_string(),
            c.fluid_sup_dev.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_paths(
    dir: &Path,
    cfg: &ExperimentConfig,
    ladder: &RegimeLadder,
    files: &mut Vec<PathBuf>,
) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    let p = experiment_params(cfg);
    let specs = cfg.specs();
    let r_values = ladder.r_values();
    for e in &ladder.entries {
        let classes: Vec<ClassParams> = e.class_params(&specs)?;
        let r_index = r_values.iter().position(|&r| r == e.r).unwrap_or(0);
        let stream = cell_stream(e.level, r_index);
        let file = dir.join(format!("{}-{}-r{}.csv", ladder.mode.label(), e.level, e.r));
        let mut w = csv::Writer::from_path(&file)?;
        w.write_record(["time", "class", "Q", "D", "B", "W", "V", "I", "rep"])?;
        let rates: Vec<f64> = classes.iter().map(|c| c.service_rate).collect();
        for rep in 0..cfg.paths_max_reps.min(cfg.reps) as u64 {
            let path = cell_path(&classes, e.r, &p, stream, rep)?;
            let x = xi(&rates, &path.mu);
            for i in 0..path.times.len() {
                for j in 0..path.classes() {
                    w.write_record([
                        path.times[i].to_string(),
                        j.to_string(),
                        path.q[j][i].to_string(),
                        path.d[j][i].to_string(),
                        path.b[j][i].to_string(),
                        (path.q[j][i] as f64 / path.mu[j]).to_string(),
                        path.v[i].to_string(),
                        (x * path.idle[i].max(0.0)).to_string(),
                        rep.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        files.push(file);
    }
    Ok(())
}

/// Executes the configured mode and writes its outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, Error> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let mut files = Vec::new();
    let start = Instant::now();
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let report = match cfg.mode {
        Mode::FixedN | Mode::VaryingN => {
            let ladder = build_ladder(cfg)?;
            let cells = convergence_experiment(&ladder, &cfg.specs(), &experiment_params(cfg))?;
            timings.push(("cells".to_string(), start.elapsed().as_secs_f64()));
            let checks = regime_checks(&ladder, &cells);
            let results = dir.join("results.csv");
            write_results(&results, &cells)?;
            files.push(results);
            if cfg.emit_paths {
                let t = Instant::now();
                write_paths(&dir.join("paths"), cfg, &ladder, &mut files)?;
                timings.push(("paths".to_string(), t.elapsed().as_secs_f64()));
            }
            RunReport {
                config: echo(cfg, ladder.levels()),
                ladder_max_error: Some(ladder.max_ladder_error()),
                cells,
                checks,
                timings,
                files,
            }
        }
        Mode::AlgebraCheck | Mode::SkorohodCheck => {
            let checks = if cfg.mode == Mode::AlgebraCheck {
                algebra_suite(cfg.seed, cfg.reps, coeff_map)
            } else {
                skorohod_suite(cfg.seed, cfg.reps, 100, skorohod_reflect)
            };
            timings.push(("suite".to_string(), start.elapsed().as_secs_f64()));
            RunReport {
                config: echo(cfg, Vec::new()),
                ladder_max_error: None,
                cells: Vec::new(),
                checks,
                timings,
                files,
            }
        }
    };
    let mut report = report;
    let summary = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(&summary, json)?;
    report.files.push(summary);
    report
        .timings
        .push(("total".to_string(), start.elapsed().as_secs_f64()));
    Ok(report)
}
